#pragma once

#include <optional>

#include "aoa/doa.hpp"
#include "aoa/sync.hpp"

namespace aoa {

enum class Estimator { music, esprit, esprit2d };
enum class OrderCriterion { aic, mdl, ecod, ground_truth };

inline const char* to_string(Estimator e) {
    switch (e) {
        case Estimator::music: return "music";
        case Estimator::esprit: return "esprit";
        case Estimator::esprit2d: return "esprit2d";
    }
    return "?";
}

inline const char* to_string(OrderCriterion c) {
    switch (c) {
        case OrderCriterion::aic: return "aic";
        case OrderCriterion::mdl: return "mdl";
        case OrderCriterion::ecod: return "ecod";
        case OrderCriterion::ground_truth: return "true";
    }
    return "?";
}

inline Estimator estimator_from_string(const std::string& s) {
    if (s == "music") return Estimator::music;
    if (s == "esprit") return Estimator::esprit;
    if (s == "esprit2d") return Estimator::esprit2d;
    throw ConfigError("unknown estimator: " + s);
}

inline OrderCriterion order_criterion_from_string(const std::string& s) {
    if (s == "aic") return OrderCriterion::aic;
    if (s == "mdl") return OrderCriterion::mdl;
    if (s == "ecod") return OrderCriterion::ecod;
    if (s == "true") return OrderCriterion::ground_truth;
    throw ConfigError("unknown order criterion: " + s);
}

struct PipelineConfig {
    SrsConfig srs = SrsConfig::standard();
    UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
    double music_step_deg = 0.01;
    int m1 = 5;
    int m2 = 1;
    // Correlation peak-to-average ratio below which a window is declared empty.
    double detection_threshold = 30.0;
};

/**
 * Receive chain for one sounding slot: cross-correlation sync against the
 * locally stored replica, per-antenna demodulation of the sounding symbols,
 * snapshot/covariance assembly and channel estimation. The slot waveform is
 * generated once at construction; all processing methods are const and safe
 * to call concurrently from Monte-Carlo workers (each worker should use its
 * own pipeline instance because the correlator caches its replica spectrum).
 */
class SlotPipeline {
public:
    explicit SlotPipeline(PipelineConfig cfg)
        : cfg_(std::move(cfg)),
          sequence_(generate_srs_sequence(cfg_.srs)),
          slot_(ofdm_modulate(map_to_grid(sequence_, cfg_.srs), cfg_.srs)),
          sounding_span_(cfg_.srs.span_samples(cfg_.srs.n_srs_symbols)),
          correlator_(std::vector<cd>(slot_.samples.begin(),
                                      slot_.samples.begin() + sounding_span_)) {
        cfg_.geom.validate();
    }

    const PipelineConfig& config() const { return cfg_; }
    const std::vector<cd>& sequence() const { return sequence_; }
    const TimeWaveform& slot() const { return slot_; }
    /// Samples covering the sounding symbols; also the sync replica length.
    int sounding_span() const { return sounding_span_; }
    const std::vector<cd>& replica() const { return correlator_.replica(); }

    /// Everything downstream estimators need from one demodulated slot.
    struct Observation {
        bool detected = false;
        int offset = 0;
        double peak_to_average = 0.0;
        SnapshotMatrix snapshots;
        Covariance cov;
        EigenDecomposition eig;
        CsiMatrix csi;
        long n_snapshots = 0;
    };

    /// Sync against the capture (slot start searched in [0, max_lag]) and
    /// demodulate. detected=false when the correlation peak does not stand
    /// out; require_detection=false processes the argmax lag regardless (used
    /// by the noise-only oracle scenarios).
    Observation observe(const RxCapture& rx, int max_lag = -1,
                        bool require_detection = true) const {
        if (rx.n_channels() != cfg_.geom.m_elements)
            throw DimensionError("SlotPipeline: capture channel count != array elements");
        if (max_lag < 0) max_lag = cfg_.srs.slot_samples() - 1;
        auto det = correlator_.detect(rx, max_lag);
        if (require_detection && det.peak_to_average < cfg_.detection_threshold) {
            Observation obs;
            obs.offset = det.offset;
            obs.peak_to_average = det.peak_to_average;
            return obs;
        }
        Observation obs = observe_at(rx, det.offset);
        obs.peak_to_average = det.peak_to_average;
        return obs;
    }

    /// Demodulate the slot that starts at a known offset.
    Observation observe_at(const RxCapture& rx, int offset) const {
        if (rx.n_channels() != cfg_.geom.m_elements)
            throw DimensionError("SlotPipeline: capture channel count != array elements");
        if (offset < 0 ||
            static_cast<std::size_t>(offset) + static_cast<std::size_t>(sounding_span_) >
                rx.n_samples())
            throw DimensionError("SlotPipeline: slot does not fit the capture");

        std::vector<ResourceGrid> grids;
        grids.reserve(rx.samples.size());
        std::vector<cd> span(static_cast<std::size_t>(sounding_span_));
        for (const auto& channel : rx.samples) {
            for (int i = 0; i < sounding_span_; ++i) {
                const cf& v = channel[static_cast<std::size_t>(offset + i)];
                span[static_cast<std::size_t>(i)] = cd{v.real(), v.imag()};
            }
            grids.push_back(ofdm_demodulate(span, cfg_.srs, cfg_.srs.n_srs_symbols));
        }

        Observation obs;
        obs.detected = true;
        obs.offset = offset;
        obs.snapshots = snapshots_from_grid(grids, cfg_.srs);
        obs.n_snapshots = obs.snapshots.n_snapshots();
        obs.cov = covariance(obs.snapshots);
        obs.eig = eigen_sorted(obs.cov);
        obs.csi = estimate_csi(grids, sequence_, cfg_.srs);
        return obs;
    }

    struct OrderEstimates {
        int aic = 0;
        int mdl = 0;
        int ecod = 0;

        int by(OrderCriterion c, int ground_truth_k) const {
            switch (c) {
                case OrderCriterion::aic: return aic;
                case OrderCriterion::mdl: return mdl;
                case OrderCriterion::ecod: return ecod;
                case OrderCriterion::ground_truth: return ground_truth_k;
            }
            return ground_truth_k;
        }
    };

    OrderEstimates orders(const Observation& obs) const {
        OrderEstimates k;
        k.aic = aic_order(obs.eig.values, obs.n_snapshots);
        k.mdl = mdl_order(obs.eig.values, obs.n_snapshots);
        k.ecod = ecod_order(obs.eig.values);
        return k;
    }

    /// Run one estimator at order k; the LOS angle is selected among the
    /// returned candidates (beamformer power for the covariance estimators,
    /// smallest delay for the joint estimator).
    AngleEstimate estimate(const Observation& obs, Estimator which, int k) const {
        switch (which) {
            case Estimator::music: {
                auto [spectrum, est] = music(obs.eig, cfg_.geom, k, cfg_.music_step_deg);
                if (est.angles_deg.empty()) throw NumericError("music: no spectrum peaks");
                est.selected_los_deg = select_los_beamformer(est, obs.cov, cfg_.geom);
                return est;
            }
            case Estimator::esprit: {
                AngleEstimate est = esprit(obs.eig, cfg_.geom, k);
                est.selected_los_deg = select_los_beamformer(est, obs.cov, cfg_.geom);
                return est;
            }
            case Estimator::esprit2d: {
                AngleEstimate est = esprit2d(obs.csi, cfg_.geom, k, cfg_.m1, cfg_.m2);
                est.selected_los_deg = select_los_min_delay(est, obs.csi, cfg_.geom);
                return est;
            }
        }
        throw ConfigError("unknown estimator");
    }

private:
    PipelineConfig cfg_;
    std::vector<cd> sequence_;
    TimeWaveform slot_;
    int sounding_span_;
    ReplicaCorrelator correlator_;
};

}  // namespace aoa
