#pragma once

#include <algorithm>
#include <limits>

#include "aoa/array.hpp"

namespace aoa {

namespace sync_detail {

/// |h(k)|^2 for every valid lag, h(k) = sum_i conj(replica[i]) rx[k+i], by
/// direct evaluation.
inline std::vector<double> xcorr_power_direct(std::span<const cd> rx,
                                              std::span<const cd> replica) {
    const std::size_t n_lags = rx.size() - replica.size() + 1;
    std::vector<double> power(n_lags);
    for (std::size_t k = 0; k < n_lags; ++k) {
        cd acc{0.0, 0.0};
        const cd* r = rx.data() + k;
        for (std::size_t i = 0; i < replica.size(); ++i)
            acc += std::conj(replica[i]) * r[i];
        power[k] = std::norm(acc);
    }
    return power;
}

/// Same values via DFT-based fast correlation.
inline std::vector<double> xcorr_power_fft(std::span<const cd> rx,
                                           std::span<const cd> replica) {
    const std::size_t n_lags = rx.size() - replica.size() + 1;
    const std::size_t nfft = fft::next_power_of_two(rx.size() + replica.size() - 1);

    std::vector<cd> buf(nfft, cd{0.0, 0.0});
    std::copy(replica.begin(), replica.end(), buf.begin());
    std::vector<cd> rep_f(nfft);
    fft::forward(buf, rep_f);

    std::fill(buf.begin(), buf.end(), cd{0.0, 0.0});
    std::copy(rx.begin(), rx.end(), buf.begin());
    std::vector<cd> rx_f(nfft);
    fft::forward(buf, rx_f);

    for (std::size_t i = 0; i < nfft; ++i) rx_f[i] *= std::conj(rep_f[i]);
    fft::inverse(rx_f, buf);

    const double scale = 1.0 / static_cast<double>(nfft);
    std::vector<double> power(n_lags);
    for (std::size_t k = 0; k < n_lags; ++k) power[k] = std::norm(buf[k] * scale);
    return power;
}

inline std::vector<cd> to_cd(std::span<const cf> x) {
    std::vector<cd> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = cd{x[i].real(), x[i].imag()};
    return out;
}

/// First index of the strictly largest entry (ties resolve to the smallest lag).
inline int argmax(std::span<const double> v) {
    int best = 0;
    double best_val = v.empty() ? 0.0 : v[0];
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] > best_val) {
            best_val = v[k];
            best = static_cast<int>(k);
        }
    return best;
}

inline constexpr std::size_t kFastCorrelationThreshold = 4096;

}  // namespace sync_detail

/// Slot-start detection: argmax_k |sum_i conj(replica[i]) rx[k+i]|. Magnitude
/// is maximized because the carrier phase is unknown; ties break toward the
/// smallest lag. Uses DFT-based correlation once rx exceeds 4096 samples.
inline int detect_offset(std::span<const cd> rx, std::span<const cd> replica) {
    if (replica.empty() || rx.size() < replica.size())
        throw DimensionError("detect_offset: replica longer than capture");
    auto power = rx.size() > sync_detail::kFastCorrelationThreshold
                     ? sync_detail::xcorr_power_fft(rx, replica)
                     : sync_detail::xcorr_power_direct(rx, replica);
    return sync_detail::argmax(power);
}

inline int detect_offset(std::span<const cf> rx, std::span<const cd> replica) {
    auto rxd = sync_detail::to_cd(rx);
    return detect_offset(std::span<const cd>(rxd), replica);
}

/**
 * Reusable correlator for one replica: the replica spectrum is computed once
 * per transform size, which matters in Monte-Carlo loops. detect() sums the
 * per-channel correlation magnitudes before taking the argmax and reports a
 * peak-to-average metric for slot presence detection.
 */
class ReplicaCorrelator {
public:
    explicit ReplicaCorrelator(std::vector<cd> replica) : replica_(std::move(replica)) {
        if (replica_.empty()) throw DimensionError("ReplicaCorrelator: empty replica");
    }

    const std::vector<cd>& replica() const { return replica_; }

    struct Detection {
        int offset = 0;
        double peak_to_average = 0.0;  // max |h|^2 over mean |h|^2
    };

    /// Multichannel detection over lags [0, max_lag] (capped by the valid range).
    Detection detect(const RxCapture& rx, int max_lag = std::numeric_limits<int>::max()) const {
        if (rx.n_channels() == 0) throw DimensionError("ReplicaCorrelator: empty capture");
        if (rx.n_samples() < replica_.size())
            throw DimensionError("ReplicaCorrelator: replica longer than capture");

        std::size_t n_lags = rx.n_samples() - replica_.size() + 1;
        if (max_lag >= 0 && static_cast<std::size_t>(max_lag) + 1 < n_lags)
            n_lags = static_cast<std::size_t>(max_lag) + 1;

        std::vector<double> combined(n_lags, 0.0);
        for (const auto& channel : rx.samples) {
            auto chan = sync_detail::to_cd(std::span<const cf>(channel));
            auto power = channel.size() > sync_detail::kFastCorrelationThreshold
                             ? correlate_fft(chan)
                             : sync_detail::xcorr_power_direct(chan, replica_);
            for (std::size_t k = 0; k < n_lags; ++k) combined[k] += power[k];
        }

        Detection det;
        det.offset = sync_detail::argmax(combined);
        double mean = 0.0;
        for (double v : combined) mean += v;
        mean /= static_cast<double>(combined.size());
        det.peak_to_average = mean > 0.0 ? combined[static_cast<std::size_t>(det.offset)] / mean
                                         : 0.0;
        return det;
    }

private:
    std::vector<double> correlate_fft(const std::vector<cd>& rx) const {
        const std::size_t nfft = fft::next_power_of_two(rx.size() + replica_.size() - 1);
        ensure_spectrum(nfft);
        std::vector<cd> buf(nfft, cd{0.0, 0.0});
        std::copy(rx.begin(), rx.end(), buf.begin());
        std::vector<cd> rx_f(nfft);
        fft::forward(buf, rx_f);
        for (std::size_t i = 0; i < nfft; ++i) rx_f[i] *= std::conj(spectrum_[i]);
        fft::inverse(rx_f, buf);
        const double scale = 1.0 / static_cast<double>(nfft);
        std::vector<double> power(rx.size() - replica_.size() + 1);
        for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k] * scale);
        return power;
    }

    void ensure_spectrum(std::size_t nfft) const {
        if (spectrum_.size() == nfft) return;
        std::vector<cd> buf(nfft, cd{0.0, 0.0});
        std::copy(replica_.begin(), replica_.end(), buf.begin());
        spectrum_.resize(nfft);
        fft::forward(buf, spectrum_);
    }

    std::vector<cd> replica_;
    mutable std::vector<cd> spectrum_;
};

/// Multichannel variant of detect_offset: per-channel correlation magnitudes
/// are summed before the argmax.
inline int detect_offset_multichannel(const RxCapture& rx, std::span<const cd> replica) {
    ReplicaCorrelator corr(std::vector<cd>(replica.begin(), replica.end()));
    return corr.detect(rx).offset;
}

}  // namespace aoa
