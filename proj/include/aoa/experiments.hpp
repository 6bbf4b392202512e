#pragma once

#include <array>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <memory>
#include <thread>

#include "aoa/scenario.hpp"

namespace aoa {

/// Long-format study results: one row per (SNR, estimator/criterion, metric).
struct CurveTable {
    struct Row {
        double snr_db = 0.0;
        std::string estimator;
        std::string metric;
        double value = 0.0;
        long n_trials = 0;
        std::uint64_t seed = 0;
    };
    std::vector<Row> rows;

    double lookup(double snr_db, const std::string& estimator,
                  const std::string& metric) const {
        for (const Row& r : rows)
            if (r.estimator == estimator && r.metric == metric &&
                ((std::isinf(r.snr_db) && std::isinf(snr_db)) ||
                 std::abs(r.snr_db - snr_db) < 1e-9))
                return r.value;
        throw ConfigError("CurveTable: no row for " + estimator + "/" + metric);
    }
};

/// One Monte-Carlo case: fixed path geometry and calibration mode; the study
/// sweeps SNR and trials within it.
struct StudyCase {
    int case_id = 0;
    std::string label;
    PathSet path_set;       // unused when noise_only
    bool noise_only = false;
    int true_k = 0;
    CalibrationMode calib_mode = CalibrationMode::none;
    std::optional<Calibration> fixed_calib;  // set when calibration is per-case
};

struct TrialOutcome {
    bool detected = false;
    int k_aic = -1;
    int k_mdl = -1;
    int k_ecod = -1;
    std::array<double, 3> angle_deg{};  // indexed by Estimator
    std::array<bool, 3> angle_ok{};
};

namespace experiments_detail {

inline std::optional<Calibration> make_calibration(const ScenarioSpec& spec,
                                                   const StudyCase& c, Rng& rng) {
    if (c.calib_mode == CalibrationMode::none) return std::nullopt;
    if (c.fixed_calib) return c.fixed_calib;
    const int m = spec.geometry.m_elements;
    Calibration calib;
    calib.perturbation =
        (c.calib_mode == CalibrationMode::p_only || c.calib_mode == CalibrationMode::p_and_c)
            ? sample_perturbation(m, spec.calibration.p_gain_db,
                                  spec.calibration.p_phase_deg, rng)
            : PerturbationModel::identity(m);
    calib.coupling =
        (c.calib_mode == CalibrationMode::c_only || c.calib_mode == CalibrationMode::p_and_c)
            ? coupling_matrix(spec.geometry, spec.calibration.c_phase_sigma, rng,
                              spec.calibration.c_phase_model)
            : CouplingModel::identity(m);
    return calib;
}

inline TimeWaveform tile_slots(const TimeWaveform& slot, int n_slots) {
    TimeWaveform wave;
    wave.sample_rate_hz = slot.sample_rate_hz;
    wave.samples.reserve(slot.samples.size() * static_cast<std::size_t>(n_slots));
    for (int i = 0; i < n_slots; ++i)
        wave.samples.insert(wave.samples.end(), slot.samples.begin(), slot.samples.end());
    return wave;
}

/// Run fn(i, thread_id) for i in [0, n). Results must be written to
/// index-addressed slots so the outcome is independent of the worker count.
template <typename Fn>
inline void parallel_for(long n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        threads.emplace_back([&, t] {
            for (;;) {
                long i = next.fetch_add(1);
                if (i >= n) break;
                fn(i, t);
            }
        });
    for (auto& th : threads) th.join();
}

}  // namespace experiments_detail

/// Build the Monte-Carlo cases a scenario expands into.
inline std::vector<StudyCase> study_cases(const ScenarioSpec& spec) {
    spec.validate();
    std::vector<StudyCase> cases;

    auto finish = [&spec](StudyCase& c) {
        if (!spec.calibration.resample_per_trial && c.calib_mode != CalibrationMode::none) {
            Rng rng(derive_seed(spec.rng_seed, static_cast<std::uint64_t>(c.case_id),
                                0xFFFFFFFFull, 0));
            c.fixed_calib = experiments_detail::make_calibration(
                spec, StudyCase{c.case_id, c.label, c.path_set, c.noise_only, c.true_k,
                                c.calib_mode, std::nullopt},
                rng);
        }
    };

    switch (spec.study) {
        case StudyKind::order: {
            if (spec.paths.empty()) {
                StudyCase c;
                c.case_id = 0;
                c.label = "noise_only";
                c.noise_only = true;
                c.true_k = 0;
                cases.push_back(std::move(c));
                break;
            }
            const PathSpec& los = spec.paths.front();
            for (std::size_t i = 0; i < spec.separations_deg.size(); ++i) {
                StudyCase c;
                c.case_id = static_cast<int>(i);
                char label[32];
                std::snprintf(label, sizeof label, "sep%gdeg", spec.separations_deg[i]);
                c.label = label;
                PathSpec mpc;
                mpc.theta_deg = los.theta_deg + spec.separations_deg[i];
                mpc.rel_power = spec.mpc_rel_power;
                mpc.delay_ns = spec.mpc_delay_ns;
                c.path_set.paths = {los.to_path(), mpc.to_path()};
                c.true_k = 2;
                c.calib_mode = spec.calibration.mode;
                finish(c);
                cases.push_back(std::move(c));
            }
            break;
        }
        case StudyKind::rmse: {
            if (spec.paths.empty()) throw ConfigError("rmse study needs at least one path");
            StudyCase c;
            c.case_id = 0;
            c.path_set = spec.make_paths();
            c.true_k = static_cast<int>(spec.paths.size());
            c.calib_mode = spec.calibration.mode;
            finish(c);
            cases.push_back(std::move(c));
            break;
        }
        case StudyKind::calibration: {
            if (spec.paths.empty())
                throw ConfigError("calibration study needs at least one path");
            const CalibrationMode modes[] = {CalibrationMode::p_only, CalibrationMode::c_only,
                                             CalibrationMode::p_and_c};
            for (int i = 0; i < 3; ++i) {
                StudyCase c;
                c.case_id = i;
                c.label = to_string(modes[i]);
                c.path_set = spec.make_paths();
                c.true_k = static_cast<int>(spec.paths.size());
                c.calib_mode = modes[i];
                finish(c);
                cases.push_back(std::move(c));
            }
            break;
        }
    }
    return cases;
}

/// Per-trial capture synthesis; shared by the study runner and the
/// `synthesize` CLI so replayed captures are bit-identical to in-memory trials.
inline RxCapture make_trial_capture(const ScenarioSpec& spec, const SlotPipeline& pipeline,
                                    const StudyCase& c, double snr_db,
                                    std::uint64_t snr_index, std::uint64_t trial_index,
                                    int n_slots = 1) {
    Rng rng(derive_seed(spec.rng_seed, static_cast<std::uint64_t>(c.case_id), snr_index,
                        trial_index));
    auto calib = experiments_detail::make_calibration(spec, c, rng);
    if (c.noise_only) {
        int length = spec.offset_samples + pipeline.sounding_span();
        return noise_only_capture(pipeline.slot(), spec.geometry, snr_db, length, rng);
    }
    const TimeWaveform& slot = pipeline.slot();
    if (n_slots == 1)
        return propagate(slot, c.path_set, spec.geometry, calib, snr_db,
                         spec.offset_samples, rng, 0, slot.support_power());
    TimeWaveform tiled = experiments_detail::tile_slots(slot, n_slots);
    return propagate(tiled, c.path_set, spec.geometry, calib, snr_db, spec.offset_samples,
                     rng, 0, slot.support_power());
}

/// Run one Monte-Carlo trial end to end (synthesize, sync, demodulate,
/// order criteria, estimators). with_estimators=false skips the angle
/// estimation work for the order-selection study.
inline TrialOutcome run_trial(const ScenarioSpec& spec, const SlotPipeline& pipeline,
                              const StudyCase& c, double snr_db, std::uint64_t snr_index,
                              std::uint64_t trial_index, bool with_estimators) {
    RxCapture rx = make_trial_capture(spec, pipeline, c, snr_db, snr_index, trial_index);
    TrialOutcome out;
    // Noise-only scenarios measure the order criteria's false-alarm rate, so
    // they demodulate at a fixed lag; syncing to the correlation argmax of
    // pure noise would enrich the snapshots along the replica direction and
    // bias that measurement. (Real captures never reach order estimation
    // without passing slot detection first.)
    auto obs = c.noise_only
                   ? pipeline.observe_at(rx, 0)
                   : pipeline.observe(rx, pipeline.config().srs.slot_samples() - 1);
    if (!obs.detected) return out;
    out.detected = true;

    auto orders = pipeline.orders(obs);
    out.k_aic = orders.aic;
    out.k_mdl = orders.mdl;
    out.k_ecod = orders.ecod;

    if (!with_estimators) return out;
    const int m = spec.geometry.m_elements;
    for (Estimator est : spec.estimators) {
        int idx = static_cast<int>(est);
        int k = std::max(1, c.true_k);
        if (est != Estimator::esprit2d) k = std::min(k, m - 1);
        try {
            AngleEstimate a = pipeline.estimate(obs, est, k);
            out.angle_deg[static_cast<std::size_t>(idx)] = a.selected_los_deg;
            out.angle_ok[static_cast<std::size_t>(idx)] = true;
        } catch (const NumericError&) {
            // recorded as a failed estimate, not dropped silently
        }
    }
    return out;
}

/// All trial outcomes of one study, indexed [case][snr][trial]; kept so the
/// optional per-trial dump and the aggregation see identical data.
struct StudyOutcomes {
    std::vector<StudyCase> cases;
    std::vector<std::vector<std::vector<TrialOutcome>>> outcomes;
};

inline StudyOutcomes run_all_trials(const ScenarioSpec& spec, int workers,
                                    bool with_estimators) {
    StudyOutcomes all;
    all.cases = study_cases(spec);
    if (workers < 1) workers = 1;

    std::vector<std::unique_ptr<SlotPipeline>> pipelines;
    for (int t = 0; t < workers; ++t)
        pipelines.push_back(std::make_unique<SlotPipeline>(spec.pipeline_config()));

    all.outcomes.resize(all.cases.size());
    for (std::size_t ci = 0; ci < all.cases.size(); ++ci) {
        all.outcomes[ci].resize(spec.snr_grid_db.size());
        for (std::size_t si = 0; si < spec.snr_grid_db.size(); ++si) {
            auto& block = all.outcomes[ci][si];
            block.resize(static_cast<std::size_t>(spec.n_trials));
            experiments_detail::parallel_for(
                spec.n_trials, workers, [&](long trial, int thread_id) {
                    block[static_cast<std::size_t>(trial)] =
                        run_trial(spec, *pipelines[static_cast<std::size_t>(thread_id)],
                                  all.cases[ci], spec.snr_grid_db[si], si,
                                  static_cast<std::uint64_t>(trial), with_estimators);
                });
        }
    }
    return all;
}

namespace experiments_detail {

inline double rmse_for(const std::vector<TrialOutcome>& block, Estimator est,
                       double true_theta) {
    double sum_sq = 0.0;
    long n = 0;
    for (const TrialOutcome& t : block) {
        std::size_t idx = static_cast<std::size_t>(static_cast<int>(est));
        if (!t.detected || !t.angle_ok[idx]) continue;
        double e = t.angle_deg[idx] - true_theta;
        sum_sq += e * e;
        ++n;
    }
    return n > 0 ? std::sqrt(sum_sq / static_cast<double>(n))
                 : std::numeric_limits<double>::quiet_NaN();
}

inline double hit_rate_for(const std::vector<TrialOutcome>& block, OrderCriterion crit,
                           int true_k) {
    long hits = 0;
    for (const TrialOutcome& t : block) {
        int k = -1;
        if (t.detected)
            k = crit == OrderCriterion::aic   ? t.k_aic
                : crit == OrderCriterion::mdl ? t.k_mdl
                                              : t.k_ecod;
        if (k == true_k) ++hits;  // undetected trials count as misses
    }
    return static_cast<double>(hits) / static_cast<double>(block.size());
}

}  // namespace experiments_detail

/// Per-element snapshot-domain SNR corresponding to a time-domain SNR defined
/// on the sounding support. The pilot cells carry the full per-bin power while
/// the support-average per-sample power is support_power(), hence the shift.
inline double snapshot_snr_db(const SlotPipeline& pipeline, double time_snr_db) {
    return time_snr_db - linear_to_db(pipeline.slot().support_power());
}

/// Order-selection hit rates per criterion and LOS/MPC separation.
inline CurveTable run_order_study(const ScenarioSpec& spec, int workers = 1,
                                  StudyOutcomes* keep = nullptr) {
    if (spec.order_criteria.empty())
        throw ConfigError("order study needs at least one criterion");
    StudyOutcomes all = run_all_trials(spec, workers, /*with_estimators=*/false);

    CurveTable table;
    for (std::size_t ci = 0; ci < all.cases.size(); ++ci)
        for (std::size_t si = 0; si < spec.snr_grid_db.size(); ++si)
            for (OrderCriterion crit : spec.order_criteria) {
                if (crit == OrderCriterion::ground_truth) continue;
                CurveTable::Row row;
                row.snr_db = spec.snr_grid_db[si];
                row.estimator = to_string(crit);
                row.metric = "hit_rate_" + all.cases[ci].label;
                row.value = experiments_detail::hit_rate_for(all.outcomes[ci][si], crit,
                                                             all.cases[ci].true_k);
                row.n_trials = spec.n_trials;
                row.seed = spec.rng_seed;
                table.rows.push_back(std::move(row));
            }
    if (keep) *keep = std::move(all);
    return table;
}

/// RMSE vs SNR per estimator, with the single-source bound appended for
/// LOS-only scenarios (order supplied as ground truth).
inline CurveTable run_rmse_study(const ScenarioSpec& spec, int workers = 1,
                                 StudyOutcomes* keep = nullptr) {
    StudyOutcomes all = run_all_trials(spec, workers, /*with_estimators=*/true);
    SlotPipeline pipeline(spec.pipeline_config());
    const long n_snapshots =
        static_cast<long>(spec.srs.n_pilot_subcarriers()) * spec.srs.n_srs_symbols;

    CurveTable table;
    for (std::size_t ci = 0; ci < all.cases.size(); ++ci) {
        const StudyCase& c = all.cases[ci];
        double true_theta = c.path_set.los().theta_deg;
        for (std::size_t si = 0; si < spec.snr_grid_db.size(); ++si) {
            for (Estimator est : spec.estimators) {
                CurveTable::Row row;
                row.snr_db = spec.snr_grid_db[si];
                row.estimator = to_string(est);
                row.metric = c.label.empty() ? "rmse_deg" : "rmse_deg_" + c.label;
                row.value = experiments_detail::rmse_for(all.outcomes[ci][si], est, true_theta);
                row.n_trials = spec.n_trials;
                row.seed = spec.rng_seed;
                table.rows.push_back(std::move(row));
            }
            if (c.path_set.paths.size() == 1 && c.calib_mode == CalibrationMode::none) {
                CurveTable::Row row;
                row.snr_db = spec.snr_grid_db[si];
                row.estimator = "crb";
                row.metric = "crb_deg";
                double snr_f = snapshot_snr_db(pipeline, spec.snr_grid_db[si]);
                row.value = std::isinf(snr_f)
                                ? 0.0
                                : std::sqrt(crb_single_source(spec.geometry, snr_f,
                                                              n_snapshots, true_theta));
                row.n_trials = spec.n_trials;
                row.seed = spec.rng_seed;
                table.rows.push_back(std::move(row));
            }
        }
    }
    if (keep) *keep = std::move(all);
    return table;
}

/// Calibration-error floors: RMSE vs SNR for the P-only, C-only and P+C cases.
inline CurveTable run_calibration_study(const ScenarioSpec& spec, int workers = 1,
                                        StudyOutcomes* keep = nullptr) {
    StudyOutcomes all = run_all_trials(spec, workers, /*with_estimators=*/true);

    CurveTable table;
    for (std::size_t ci = 0; ci < all.cases.size(); ++ci) {
        const StudyCase& c = all.cases[ci];
        double true_theta = c.path_set.los().theta_deg;
        for (std::size_t si = 0; si < spec.snr_grid_db.size(); ++si)
            for (Estimator est : spec.estimators) {
                CurveTable::Row row;
                row.snr_db = spec.snr_grid_db[si];
                row.estimator = to_string(est);
                row.metric = "rmse_deg_" + c.label;
                row.value = experiments_detail::rmse_for(all.outcomes[ci][si], est, true_theta);
                row.n_trials = spec.n_trials;
                row.seed = spec.rng_seed;
                table.rows.push_back(std::move(row));
            }
    }
    if (keep) *keep = std::move(all);
    return table;
}

inline CurveTable run_study(const ScenarioSpec& spec, int workers = 1,
                            StudyOutcomes* keep = nullptr) {
    switch (spec.study) {
        case StudyKind::order: return run_order_study(spec, workers, keep);
        case StudyKind::rmse: return run_rmse_study(spec, workers, keep);
        case StudyKind::calibration: return run_calibration_study(spec, workers, keep);
    }
    throw ConfigError("unknown study kind");
}

/// Empirical CDF of |errors| as (value, cumulative probability) pairs.
inline std::vector<std::pair<double, double>> compute_cdf(std::vector<double> errors) {
    if (errors.empty()) throw ConfigError("compute_cdf: empty input");
    for (double& e : errors) e = std::abs(e);
    std::sort(errors.begin(), errors.end());
    std::vector<std::pair<double, double>> cdf;
    cdf.reserve(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        cdf.emplace_back(errors[i], static_cast<double>(i + 1) /
                                        static_cast<double>(errors.size()));
    return cdf;
}

/// Nearest-rank percentile of |errors|, p in (0, 100].
inline double percentile(std::vector<double> errors, double p) {
    if (errors.empty()) throw ConfigError("percentile: empty input");
    if (!(p > 0.0) || p > 100.0) throw ConfigError("percentile: p out of range");
    for (double& e : errors) e = std::abs(e);
    std::sort(errors.begin(), errors.end());
    auto rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(errors.size())));
    if (rank < 1) rank = 1;
    return errors[rank - 1];
}

/// Deterministic CSV emission: fixed header, stable row order, fixed float
/// formatting, so same-seed runs are byte identical regardless of workers.
inline void emit_results(const CurveTable& table, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("emit_results: cannot open " + path.string());
    std::fputs("snr_db,estimator,metric,value,n_trials,seed\n", f);
    for (const CurveTable::Row& r : table.rows)
        std::fprintf(f, "%.10g,%s,%s,%.10g,%ld,%" PRIu64 "\n", r.snr_db,
                     r.estimator.c_str(), r.metric.c_str(), r.value, r.n_trials, r.seed);
    if (std::fclose(f) != 0) throw IoError("emit_results: write failed for " + path.string());
}

/// Optional per-trial record dump (debugging interface).
inline void dump_trials(const ScenarioSpec& spec, const StudyOutcomes& all,
                        const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("dump_trials: cannot open " + path.string());
    std::fputs("case,label,snr_db,trial,detected,k_aic,k_mdl,k_ecod,music,esprit,esprit2d\n",
               f);
    for (std::size_t ci = 0; ci < all.cases.size(); ++ci)
        for (std::size_t si = 0; si < all.outcomes[ci].size(); ++si)
            for (std::size_t ti = 0; ti < all.outcomes[ci][si].size(); ++ti) {
                const TrialOutcome& t = all.outcomes[ci][si][ti];
                std::fprintf(f, "%d,%s,%.10g,%zu,%d,%d,%d,%d", all.cases[ci].case_id,
                             all.cases[ci].label.c_str(), spec.snr_grid_db[si], ti,
                             t.detected ? 1 : 0, t.k_aic, t.k_mdl, t.k_ecod);
                for (int e = 0; e < 3; ++e) {
                    if (t.angle_ok[static_cast<std::size_t>(e)])
                        std::fprintf(f, ",%.12g", t.angle_deg[static_cast<std::size_t>(e)]);
                    else
                        std::fputs(",", f);
                }
                std::fputs("\n", f);
            }
    if (std::fclose(f) != 0) throw IoError("dump_trials: write failed for " + path.string());
}

}  // namespace aoa
