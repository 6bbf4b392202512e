#pragma once

#include <numeric>
#include <optional>

#include "aoa/fft.hpp"

namespace aoa {

/**
 * Uplink sounding slot configuration.
 *
 * One slot of n_slot_symbols OFDM symbols; the sounding sequence occupies the
 * first n_srs_symbols on every comb_ktc-th active subcarrier. Default numbers
 * follow the usual NR numerology scaling: mu=1 -> 30 kHz subcarrier spacing,
 * 50 MHz -> 133 resource blocks = 1596 active subcarriers on a 2048-point
 * transform at 61.44 Msps, normal CP (one long CP on the slot's first symbol).
 */
struct SrsConfig {
    int numerology_mu = 1;
    double bandwidth_hz = 50e6;
    int comb_ktc = 2;
    int n_srs_symbols = 4;
    int n_slot_symbols = 14;
    int fft_size = 2048;
    int n_active_subcarriers = 1596;
    std::vector<int> cp_lengths;  // per symbol, in samples
    double sample_rate_hz = 61.44e6;
    int zc_root = 25;

    double subcarrier_spacing_hz() const { return 15e3 * (1 << numerology_mu); }
    int n_pilot_subcarriers() const { return n_active_subcarriers / comb_ktc; }
    double pilot_spacing_hz() const { return comb_ktc * subcarrier_spacing_hz(); }

    int symbol_span(int l) const { return fft_size + cp_lengths.at(static_cast<std::size_t>(l)); }

    /// Sample index where symbol l starts within the slot.
    int symbol_start(int l) const {
        int s = 0;
        for (int i = 0; i < l; ++i) s += symbol_span(i);
        return s;
    }

    int slot_samples() const { return symbol_start(n_slot_symbols); }
    double slot_duration_s() const { return slot_samples() / sample_rate_hz; }

    /// Samples covering the first n symbols (the sounding portion for n = n_srs_symbols).
    int span_samples(int n_symbols) const { return symbol_start(n_symbols); }

    void validate() const {
        if (n_active_subcarriers <= 0) throw ConfigError("SrsConfig: no active subcarriers");
        if (comb_ktc <= 0 || n_active_subcarriers % comb_ktc != 0)
            throw ConfigError("SrsConfig: comb_ktc must divide the active subcarrier count");
        if (n_srs_symbols <= 0 || n_srs_symbols > n_slot_symbols)
            throw ConfigError("SrsConfig: n_srs_symbols must be in [1, n_slot_symbols]");
        if (fft_size < n_active_subcarriers)
            throw ConfigError("SrsConfig: fft_size smaller than active subcarrier count");
        if (!fft::is_power_of_two(static_cast<std::size_t>(fft_size)))
            throw ConfigError("SrsConfig: fft_size must be a power of two");
        if (static_cast<int>(cp_lengths.size()) != n_slot_symbols)
            throw ConfigError("SrsConfig: need one CP length per slot symbol");
        for (int cp : cp_lengths)
            if (cp < 0) throw ConfigError("SrsConfig: negative CP length");
        double expected_rate = fft_size * subcarrier_spacing_hz();
        if (std::abs(sample_rate_hz - expected_rate) > 1e-6 * expected_rate)
            throw ConfigError("SrsConfig: sample_rate_hz must equal fft_size * subcarrier spacing");
        if (zc_root <= 0) throw ConfigError("SrsConfig: zc_root must be positive");
    }

    /// Standard configuration for a (numerology, bandwidth) pair.
    static SrsConfig standard(int mu = 1, double bandwidth_hz = 50e6) {
        // Transmission-bandwidth RB counts for the supported combinations.
        int n_rb = 0;
        if (mu == 1 && std::abs(bandwidth_hz - 50e6) < 1.0) n_rb = 133;
        else if (mu == 1 && std::abs(bandwidth_hz - 20e6) < 1.0) n_rb = 51;
        else if (mu == 2 && std::abs(bandwidth_hz - 50e6) < 1.0) n_rb = 66;
        else if (mu == 2 && std::abs(bandwidth_hz - 20e6) < 1.0) n_rb = 24;
        else
            throw ConfigError("SrsConfig::standard: unsupported numerology/bandwidth; "
                              "set n_active_subcarriers explicitly");

        SrsConfig cfg;
        cfg.numerology_mu = mu;
        cfg.bandwidth_hz = bandwidth_hz;
        cfg.n_active_subcarriers = 12 * n_rb;
        cfg.fft_size = static_cast<int>(
            fft::next_power_of_two(static_cast<std::size_t>(cfg.n_active_subcarriers)));
        if (cfg.fft_size < 128) cfg.fft_size = 128;
        cfg.sample_rate_hz = cfg.fft_size * cfg.subcarrier_spacing_hz();
        // Normal CP scaled to the transform size; the slot-leading symbol
        // carries the extra fixed-time chunk.
        int base = 144 * cfg.fft_size / 2048;
        int extra = 16 * cfg.fft_size / 2048 * (1 << mu);
        cfg.cp_lengths.assign(static_cast<std::size_t>(cfg.n_slot_symbols), base);
        cfg.cp_lengths[0] = base + extra;
        return cfg;
    }
};

/// Active-subcarrier x symbol grid. Only comb cells of the sounding symbols
/// are nonzero; those cells are unit magnitude.
struct ResourceGrid {
    Eigen::MatrixXcd cells;  // n_active_subcarriers x n_symbols

    Eigen::Index n_subcarriers() const { return cells.rows(); }
    Eigen::Index n_symbols() const { return cells.cols(); }
};

struct TimeWaveform {
    std::vector<cd> samples;
    double sample_rate_hz = 0.0;

    /// Length with trailing exact-zero samples removed (the sounding portion).
    std::size_t support_length() const {
        std::size_t n = samples.size();
        while (n > 0 && samples[n - 1] == cd{0.0, 0.0}) --n;
        return n;
    }

    /// Mean per-sample power over the nonzero support.
    double support_power() const {
        std::size_t n = support_length();
        if (n == 0) return 0.0;
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += std::norm(samples[i]);
        return e / static_cast<double>(n);
    }
};

/// Per-subcarrier channel estimate; one row per comb-occupied subcarrier,
/// one column per antenna. pilot_spacing_hz is the frequency step between rows.
struct CsiMatrix {
    Eigen::MatrixXcd h;
    double pilot_spacing_hz = 0.0;
};

namespace detail {

inline bool is_prime(int n) {
    if (n < 2) return false;
    for (int d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

inline int largest_prime_at_most(int n) {
    for (int p = n; p >= 2; --p)
        if (is_prime(p)) return p;
    throw ConfigError("no prime sequence length available");
}

/// Active-row index -> FFT bin for the centered subcarrier mapping.
inline int active_row_to_bin(int row, int n_active, int fft_size) {
    int signed_idx = row - n_active / 2;
    return signed_idx >= 0 ? signed_idx : signed_idx + fft_size;
}

}  // namespace detail

/// Low-PAPR base sequence: Zadoff-Chu of the largest prime length not
/// exceeding the comb position count, cyclically extended to fill the comb.
inline std::vector<cd> generate_srs_sequence(const SrsConfig& config) {
    config.validate();
    int n = config.n_pilot_subcarriers();
    if (n < 2) throw ConfigError("generate_srs_sequence: fewer than two comb positions");
    int n_zc = detail::largest_prime_at_most(n);
    int u = config.zc_root % n_zc;
    if (u == 0 || std::gcd(u, n_zc) != 1)
        throw ConfigError("generate_srs_sequence: zc_root not coprime with sequence length");
    std::vector<cd> seq(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        int m = k % n_zc;
        double phase = -kPi * static_cast<double>(u) * m * (m + 1) / n_zc;
        seq[static_cast<std::size_t>(k)] = std::polar(1.0, phase);
    }
    return seq;
}

/// Place the sequence on every comb_ktc-th subcarrier of the first
/// n_srs_symbols symbols; all remaining cells stay zero.
inline ResourceGrid map_to_grid(const std::vector<cd>& seq, const SrsConfig& config) {
    config.validate();
    if (static_cast<int>(seq.size()) != config.n_pilot_subcarriers())
        throw DimensionError("map_to_grid: sequence length does not match comb positions");
    ResourceGrid grid;
    grid.cells = Eigen::MatrixXcd::Zero(config.n_active_subcarriers, config.n_slot_symbols);
    for (int l = 0; l < config.n_srs_symbols; ++l)
        for (int k = 0; k < static_cast<int>(seq.size()); ++k)
            grid.cells(k * config.comb_ktc, l) = seq[static_cast<std::size_t>(k)];
    return grid;
}

/// Per-symbol unitary inverse transform of the centered grid column, cyclic
/// prefix prepended. Deterministic for fixed input.
inline TimeWaveform ofdm_modulate(const ResourceGrid& grid, const SrsConfig& config) {
    config.validate();
    if (grid.n_subcarriers() != config.n_active_subcarriers ||
        grid.n_symbols() != config.n_slot_symbols)
        throw DimensionError("ofdm_modulate: grid dimensions do not match config");

    const int n = config.fft_size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    TimeWaveform wave;
    wave.sample_rate_hz = config.sample_rate_hz;
    wave.samples.assign(static_cast<std::size_t>(config.slot_samples()), cd{0.0, 0.0});

    std::vector<cd> freq(static_cast<std::size_t>(n));
    std::vector<cd> body(static_cast<std::size_t>(n));
    for (int l = 0; l < config.n_slot_symbols; ++l) {
        std::fill(freq.begin(), freq.end(), cd{0.0, 0.0});
        for (int a = 0; a < config.n_active_subcarriers; ++a) {
            int bin = detail::active_row_to_bin(a, config.n_active_subcarriers, n);
            freq[static_cast<std::size_t>(bin)] = grid.cells(a, l);
        }
        fft::inverse(freq, body);
        for (auto& v : body) v *= scale;

        int cp = config.cp_lengths[static_cast<std::size_t>(l)];
        cd* dst = wave.samples.data() + config.symbol_start(l);
        for (int i = 0; i < cp; ++i) dst[i] = body[static_cast<std::size_t>(n - cp + i)];
        std::copy(body.begin(), body.end(), dst + cp);
    }
    return wave;
}

/// Receiver dual of ofdm_modulate: strip CPs, unitary forward transform,
/// extract the active subcarriers. The waveform is assumed time aligned.
/// n_symbols limits demodulation to the leading symbols (default: full slot).
inline ResourceGrid ofdm_demodulate(std::span<const cd> samples, const SrsConfig& config,
                                    int n_symbols = -1) {
    config.validate();
    if (n_symbols < 0) n_symbols = config.n_slot_symbols;
    if (n_symbols > config.n_slot_symbols)
        throw DimensionError("ofdm_demodulate: more symbols than the slot holds");
    if (static_cast<int>(samples.size()) != config.span_samples(n_symbols))
        throw DimensionError("ofdm_demodulate: sample count does not match requested span");

    const int n = config.fft_size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    ResourceGrid grid;
    grid.cells = Eigen::MatrixXcd::Zero(config.n_active_subcarriers, n_symbols);

    std::vector<cd> body(static_cast<std::size_t>(n));
    std::vector<cd> freq(static_cast<std::size_t>(n));
    for (int l = 0; l < n_symbols; ++l) {
        int cp = config.cp_lengths[static_cast<std::size_t>(l)];
        const cd* src = samples.data() + config.symbol_start(l) + cp;
        std::copy(src, src + n, body.begin());
        fft::forward(body, freq);
        for (int a = 0; a < config.n_active_subcarriers; ++a) {
            int bin = detail::active_row_to_bin(a, config.n_active_subcarriers, n);
            grid.cells(a, l) = freq[static_cast<std::size_t>(bin)] * scale;
        }
    }
    return grid;
}

inline ResourceGrid ofdm_demodulate(const TimeWaveform& wave, const SrsConfig& config,
                                    int n_symbols = -1) {
    return ofdm_demodulate(std::span<const cd>(wave.samples), config, n_symbols);
}

/// Least-squares channel estimate per comb cell (received / reference),
/// coherently averaged over the sounding symbols.
inline CsiMatrix estimate_csi(const std::vector<ResourceGrid>& rx_grids,
                              const std::vector<cd>& ref_seq, const SrsConfig& config) {
    config.validate();
    if (rx_grids.empty()) throw DimensionError("estimate_csi: no antenna grids");
    if (static_cast<int>(ref_seq.size()) != config.n_pilot_subcarriers())
        throw DimensionError("estimate_csi: reference length does not match comb positions");

    const int n_pilot = config.n_pilot_subcarriers();
    const auto n_ant = static_cast<Eigen::Index>(rx_grids.size());
    int n_sym = std::min<int>(config.n_srs_symbols, static_cast<int>(rx_grids[0].n_symbols()));
    if (n_sym < 1) throw DimensionError("estimate_csi: no sounding symbols present");

    CsiMatrix csi;
    csi.pilot_spacing_hz = config.pilot_spacing_hz();
    csi.h = Eigen::MatrixXcd::Zero(n_pilot, n_ant);
    for (Eigen::Index m = 0; m < n_ant; ++m) {
        const ResourceGrid& g = rx_grids[static_cast<std::size_t>(m)];
        if (g.n_subcarriers() != config.n_active_subcarriers || g.n_symbols() < n_sym)
            throw DimensionError("estimate_csi: antenna grid dimensions mismatch");
        for (int k = 0; k < n_pilot; ++k) {
            cd ref = ref_seq[static_cast<std::size_t>(k)];
            if (std::abs(ref) < 1e-12)
                throw NumericError("estimate_csi: zero reference cell");
            cd acc{0.0, 0.0};
            for (int l = 0; l < n_sym; ++l) acc += g.cells(k * config.comb_ktc, l) / ref;
            csi.h(k, m) = acc / static_cast<double>(n_sym);
        }
    }
    return csi;
}

}  // namespace aoa
