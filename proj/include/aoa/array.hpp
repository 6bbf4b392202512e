#pragma once

#include <cmath>
#include <optional>

#include "aoa/waveform.hpp"

namespace aoa {

/// Uniform linear array of m_elements antennas spaced spacing_m apart.
struct UlaGeometry {
    int m_elements = 3;
    double spacing_m = 0.5 * kSpeedOfLight / 2.4e9;
    double carrier_hz = 2.4e9;

    double wavelength() const { return kSpeedOfLight / carrier_hz; }

    void validate() const {
        if (m_elements < 2) throw ConfigError("UlaGeometry: need at least two elements");
        if (spacing_m <= 0.0) throw ConfigError("UlaGeometry: spacing must be positive");
        if (carrier_hz <= 0.0) throw ConfigError("UlaGeometry: carrier must be positive");
    }

    static UlaGeometry half_wavelength(int m_elements, double carrier_hz) {
        UlaGeometry g;
        g.m_elements = m_elements;
        g.carrier_hz = carrier_hz;
        g.spacing_m = 0.5 * g.wavelength();
        g.validate();
        return g;
    }
};

/// One propagation path: azimuth, static complex amplitude, delay.
struct Path {
    double theta_deg = 0.0;
    cd gain{1.0, 0.0};
    double delay_s = 0.0;
};

/// The paths of a scenario; path 0 is the line of sight by convention.
struct PathSet {
    std::vector<Path> paths;

    void validate() const {
        if (paths.empty()) throw ConfigError("PathSet: at least one path required");
        for (const Path& p : paths) {
            if (!(std::abs(p.theta_deg) < 90.0))
                throw ConfigError("PathSet: |theta| must be < 90 deg");
            if (p.delay_s < 0.0) throw ConfigError("PathSet: negative delay");
        }
    }

    const Path& los() const { return paths.front(); }
};

/// Element vector a(theta), element m = exp(-j 2 pi f_c d m sin(theta) / c).
inline Eigen::VectorXcd steering_vector(const UlaGeometry& geom, double theta_deg) {
    geom.validate();
    if (!(std::abs(theta_deg) < 90.0))
        throw ConfigError("steering_vector: |theta| must be < 90 deg");
    double phase_step =
        -2.0 * kPi * geom.carrier_hz * geom.spacing_m * std::sin(theta_deg * kPi / 180.0) /
        kSpeedOfLight;
    Eigen::VectorXcd a(geom.m_elements);
    for (int m = 0; m < geom.m_elements; ++m) a(m) = std::polar(1.0, phase_step * m);
    return a;
}

/**
 * Per-element gain/phase mismatch, the diagonal matrix applied to the nominal
 * steering vector of an uncalibrated array. Each element's total gain factor
 * is uniform in [10^(-p_gain_db/20), 10^(+p_gain_db/20)] and its phase offset
 * uniform in +-p_phase_deg.
 */
struct PerturbationModel {
    double p_gain_db = 0.0;
    double p_phase_deg = 0.0;
    Eigen::VectorXcd sampled;  // diagonal entries, one per element

    static PerturbationModel identity(int m_elements) {
        PerturbationModel p;
        p.sampled = Eigen::VectorXcd::Ones(m_elements);
        return p;
    }
};

inline PerturbationModel sample_perturbation(int m_elements, double p_gain_db,
                                             double p_phase_deg, Rng& rng) {
    if (p_gain_db < 0.0 || p_phase_deg < 0.0)
        throw ConfigError("sample_perturbation: bounds must be nonnegative");
    PerturbationModel model;
    model.p_gain_db = p_gain_db;
    model.p_phase_deg = p_phase_deg;
    model.sampled.resize(m_elements);
    double g_lo = std::pow(10.0, -p_gain_db / 20.0);
    double g_hi = std::pow(10.0, +p_gain_db / 20.0);
    std::uniform_real_distribution<double> gain_dist(g_lo, g_hi);
    std::uniform_real_distribution<double> phase_dist(-p_phase_deg * kPi / 180.0,
                                                      +p_phase_deg * kPi / 180.0);
    for (int m = 0; m < m_elements; ++m) {
        double g = gain_dist(rng);
        double ph = phase_dist(rng);
        model.sampled(m) = std::polar(g, ph);
    }
    return model;
}

/// How the phase of a coupling coefficient is drawn.
enum class CouplingPhase {
    gaussian,        // zero-mean Gaussian, the default model
    path_length,     // deterministic -2 pi d / lambda (known to be unrealistic)
};

/**
 * Mutual coupling matrix. Off-diagonal magnitudes follow the free-space link
 * budget between elements (unit element gains), |c| = lambda / (4 pi d_qm).
 * Phases are drawn once per element-distance class, so C is reciprocal and
 * Toeplitz; the diagonal is exactly 1.
 */
struct CouplingModel {
    Eigen::MatrixXcd c;

    static CouplingModel identity(int m_elements) {
        CouplingModel m;
        m.c = Eigen::MatrixXcd::Identity(m_elements, m_elements);
        return m;
    }
};

inline double default_coupling_phase_sigma() { return std::sqrt(kPi / 20.0); }

inline CouplingModel coupling_matrix(const UlaGeometry& geom,
                                     double phase_sigma, Rng& rng,
                                     CouplingPhase phase_model = CouplingPhase::gaussian) {
    geom.validate();
    const int m = geom.m_elements;
    const double lambda = geom.wavelength();
    CouplingModel model;
    model.c = Eigen::MatrixXcd::Identity(m, m);
    std::normal_distribution<double> phase_dist(0.0, phase_sigma);
    for (int sep = 1; sep < m; ++sep) {
        double dist = sep * geom.spacing_m;
        double mag = lambda / (4.0 * kPi * dist);
        double phase = phase_model == CouplingPhase::gaussian
                           ? phase_dist(rng)
                           : -2.0 * kPi * dist / lambda;
        cd coeff = std::polar(mag, phase);
        for (int q = 0; q + sep < m; ++q) {
            model.c(q, q + sep) = coeff;
            model.c(q + sep, q) = coeff;
        }
    }
    return model;
}

inline CouplingModel coupling_matrix(const UlaGeometry& geom, Rng& rng) {
    return coupling_matrix(geom, default_coupling_phase_sigma(), rng);
}

struct Calibration {
    PerturbationModel perturbation;
    CouplingModel coupling;
};

/// Multichannel received samples, one row per antenna. Samples are stored in
/// 32-bit float precision, matching the capture file format, so in-memory and
/// replayed processing see bit-identical data.
struct RxCapture {
    std::vector<std::vector<cf>> samples;  // m_elements rows
    double sample_rate_hz = 0.0;
    int true_offset = 0;  // simulation metadata

    int n_channels() const { return static_cast<int>(samples.size()); }
    std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
};

/// Adds circular complex Gaussian noise with total variance
/// signal_power / 10^(snr_db/10) per sample. snr_db = +inf leaves the input unchanged.
inline void awgn(std::span<cd> samples, double snr_db, double signal_power, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return;
    if (signal_power <= 0.0) throw ConfigError("awgn: signal power must be positive");
    double variance = signal_power / db_to_linear(snr_db);
    std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
    for (cd& v : samples) v += cd{dist(rng), dist(rng)};
}

/**
 * Synthesize the received multichannel capture:
 *
 *   y_m(t) = sum_p (C P a(theta_p))_m g_p s(t - tau_p
 *            shifted by `offset` samples, plus AWGN.
 *
 * Delays are rounded to the nearest sample. Noise variance is set so that the
 * per-antenna SNR of the nominal LOS component over its support equals snr_db
 * (with calib absent C P = I and the definition is exact per antenna).
 * out_len = 0 sizes the capture to offset + support + max delay.
 * los_ref_power overrides the per-sample unit-gain reference power used for
 * the noise level (needed when the waveform is a multi-slot tiling whose
 * average power differs from the single-slot sounding support).
 */
inline RxCapture propagate(const TimeWaveform& wave, const PathSet& paths,
                           const UlaGeometry& geom,
                           const std::optional<Calibration>& calib, double snr_db,
                           int offset, Rng& rng, int out_len = 0,
                           double los_ref_power = 0.0) {
    paths.validate();
    geom.validate();
    if (offset < 0) throw ConfigError("propagate: negative offset");

    const std::size_t support = wave.support_length();
    if (support == 0) throw ConfigError("propagate: empty waveform");

    std::vector<long> delay_samples;
    long max_delay = 0;
    for (const Path& p : paths.paths) {
        long d = std::lround(p.delay_s * wave.sample_rate_hz);
        delay_samples.push_back(d);
        max_delay = std::max(max_delay, d);
    }
    std::size_t needed = static_cast<std::size_t>(offset) + support +
                         static_cast<std::size_t>(max_delay);
    std::size_t length = out_len > 0 ? static_cast<std::size_t>(out_len) : needed;

    Eigen::MatrixXcd mix = Eigen::MatrixXcd::Identity(geom.m_elements, geom.m_elements);
    if (calib) mix = calib->coupling.c * calib->perturbation.sampled.asDiagonal();

    std::vector<std::vector<cd>> rows(
        static_cast<std::size_t>(geom.m_elements),
        std::vector<cd>(length, cd{0.0, 0.0}));

    for (std::size_t p = 0; p < paths.paths.size(); ++p) {
        const Path& path = paths.paths[p];
        Eigen::VectorXcd v = mix * steering_vector(geom, path.theta_deg);
        std::size_t start = static_cast<std::size_t>(offset) +
                            static_cast<std::size_t>(delay_samples[p]);
        std::size_t count = std::min(support, length > start ? length - start : 0);
        for (int m = 0; m < geom.m_elements; ++m) {
            cd w = v(m) * path.gain;
            cd* dst = rows[static_cast<std::size_t>(m)].data() + start;
            for (std::size_t n = 0; n < count; ++n) dst[n] += w * wave.samples[n];
        }
    }

    if (!(std::isinf(snr_db) && snr_db > 0.0)) {
        double unit_power = los_ref_power > 0.0 ? los_ref_power : wave.support_power();
        double los_power = std::norm(paths.los().gain) * unit_power;
        if (los_power <= 0.0) throw ConfigError("propagate: LOS component has zero power");
        for (int m = 0; m < geom.m_elements; ++m)
            awgn(std::span<cd>(rows[static_cast<std::size_t>(m)]), snr_db, los_power, rng);
    }

    RxCapture rx;
    rx.sample_rate_hz = wave.sample_rate_hz;
    rx.true_offset = offset;
    rx.samples.resize(static_cast<std::size_t>(geom.m_elements));
    for (int m = 0; m < geom.m_elements; ++m) {
        auto& dst = rx.samples[static_cast<std::size_t>(m)];
        dst.resize(length);
        const auto& src = rows[static_cast<std::size_t>(m)];
        for (std::size_t n = 0; n < length; ++n)
            dst[n] = cf{static_cast<float>(src[n].real()), static_cast<float>(src[n].imag())};
    }
    return rx;
}

/// Noise-only capture with the variance a unit-gain LOS at snr_db would imply.
/// Used by scenarios that declare zero paths.
inline RxCapture noise_only_capture(const TimeWaveform& wave, const UlaGeometry& geom,
                                    double snr_db, int length, Rng& rng) {
    geom.validate();
    if (std::isinf(snr_db)) throw ConfigError("noise_only_capture: SNR must be finite");
    double ref_power = wave.support_power();
    RxCapture rx;
    rx.sample_rate_hz = wave.sample_rate_hz;
    rx.true_offset = 0;
    rx.samples.resize(static_cast<std::size_t>(geom.m_elements));
    std::vector<cd> row(static_cast<std::size_t>(length), cd{0.0, 0.0});
    for (int m = 0; m < geom.m_elements; ++m) {
        std::fill(row.begin(), row.end(), cd{0.0, 0.0});
        awgn(std::span<cd>(row), snr_db, ref_power, rng);
        auto& dst = rx.samples[static_cast<std::size_t>(m)];
        dst.resize(row.size());
        for (std::size_t n = 0; n < row.size(); ++n)
            dst[n] = cf{static_cast<float>(row[n].real()), static_cast<float>(row[n].imag())};
    }
    return rx;
}

}  // namespace aoa
