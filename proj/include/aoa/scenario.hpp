#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "aoa/pipeline.hpp"

namespace aoa {

enum class StudyKind { order, rmse, calibration };

inline const char* to_string(StudyKind s) {
    switch (s) {
        case StudyKind::order: return "order";
        case StudyKind::rmse: return "rmse";
        case StudyKind::calibration: return "calibration";
    }
    return "?";
}

enum class CalibrationMode { none, p_only, c_only, p_and_c };

inline const char* to_string(CalibrationMode m) {
    switch (m) {
        case CalibrationMode::none: return "none";
        case CalibrationMode::p_only: return "p_only";
        case CalibrationMode::c_only: return "c_only";
        case CalibrationMode::p_and_c: return "p_and_c";
    }
    return "?";
}

struct CalibrationSpec {
    CalibrationMode mode = CalibrationMode::none;
    double p_gain_db = 0.7;
    double p_phase_deg = 15.0;
    double c_phase_sigma = default_coupling_phase_sigma();
    CouplingPhase c_phase_model = CouplingPhase::gaussian;
    bool resample_per_trial = true;
};

/// Path template: relative power is an amplitude-squared ratio against the LOS.
struct PathSpec {
    double theta_deg = 0.0;
    double rel_power = 1.0;
    double phase_deg = 0.0;
    double delay_ns = 0.0;

    Path to_path() const {
        Path p;
        p.theta_deg = theta_deg;
        p.gain = std::polar(std::sqrt(rel_power), phase_deg * kPi / 180.0);
        p.delay_s = delay_ns * 1e-9;
        return p;
    }
};

/// Everything a Monte-Carlo study needs; loadable from a JSON scenario file.
struct ScenarioSpec {
    StudyKind study = StudyKind::rmse;
    SrsConfig srs = SrsConfig::standard();
    UlaGeometry geometry = UlaGeometry::half_wavelength(3, 2.4e9);
    std::vector<PathSpec> paths{PathSpec{}};  // empty list = noise-only scenario
    std::vector<double> snr_grid_db{-10, -5, 0, 5, 10, 15, 20, 25, 30};
    int n_trials = 1000;
    CalibrationSpec calibration;
    std::vector<Estimator> estimators{Estimator::music, Estimator::esprit,
                                      Estimator::esprit2d};
    std::vector<OrderCriterion> order_criteria{OrderCriterion::aic, OrderCriterion::mdl};
    std::uint64_t rng_seed = 1;
    int offset_samples = 600;
    double music_step_deg = 0.01;
    int m1 = 5;
    int m2 = 1;
    double detection_threshold = 30.0;

    // Order study: the MPC swept against the LOS template.
    std::vector<double> separations_deg{2, 4, 6, 8, 10};
    double mpc_rel_power = 0.7;
    double mpc_delay_ns = 100.0;

    // Capture replay plan.
    double window_s = 6e-3;
    double period_s = 1.0;

    void validate() const {
        srs.validate();
        geometry.validate();
        if (n_trials < 1) throw ConfigError("scenario: n_trials must be >= 1");
        if (snr_grid_db.empty()) throw ConfigError("scenario: empty SNR grid");
        if (offset_samples < 0) throw ConfigError("scenario: negative offset");
        if (study == StudyKind::calibration && calibration.mode == CalibrationMode::none)
            throw ConfigError("scenario: calibration study needs a calibration mode");
        for (const PathSpec& p : paths)
            if (!(std::abs(p.theta_deg) < 90.0))
                throw ConfigError("scenario: |theta| must be < 90 deg");
        if (!(window_s > 0.0) || window_s > period_s)
            throw ConfigError("scenario: need 0 < window_s <= period_s");
    }

    PathSet make_paths() const {
        PathSet set;
        for (const PathSpec& p : paths) set.paths.push_back(p.to_path());
        return set;
    }

    PipelineConfig pipeline_config() const {
        PipelineConfig cfg;
        cfg.srs = srs;
        cfg.geom = geometry;
        cfg.music_step_deg = music_step_deg;
        cfg.m1 = m1;
        cfg.m2 = m2;
        cfg.detection_threshold = detection_threshold;
        return cfg;
    }
};

namespace scenario_detail {

inline double parse_snr(const nlohmann::json& v) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity")
            return std::numeric_limits<double>::infinity();
        throw ConfigError("scenario: bad SNR entry '" + s + "'");
    }
    return v.get<double>();
}

inline std::vector<double> parse_snr_grid(const nlohmann::json& v) {
    std::vector<double> grid;
    if (v.is_array()) {
        for (const auto& e : v) grid.push_back(parse_snr(e));
    } else if (v.is_object()) {
        double start = v.at("start").get<double>();
        double stop = v.at("stop").get<double>();
        double step = v.value("step", 5.0);
        if (step <= 0.0) throw ConfigError("scenario: SNR grid step must be positive");
        for (double s = start; s <= stop + 1e-9; s += step) grid.push_back(s);
    } else {
        throw ConfigError("scenario: snr_grid_db must be an array or {start,stop,step}");
    }
    return grid;
}

}  // namespace scenario_detail

inline ScenarioSpec parse_scenario(const nlohmann::json& j) {
    ScenarioSpec spec;
    try {
        if (j.contains("study")) {
            std::string s = j.at("study").get<std::string>();
            if (s == "order") spec.study = StudyKind::order;
            else if (s == "rmse") spec.study = StudyKind::rmse;
            else if (s == "calibration") spec.study = StudyKind::calibration;
            else throw ConfigError("scenario: unknown study '" + s + "'");
        }
        if (j.contains("waveform")) {
            const auto& w = j.at("waveform");
            spec.srs = SrsConfig::standard(w.value("numerology_mu", 1),
                                           w.value("bandwidth_hz", 50e6));
            spec.srs.comb_ktc = w.value("comb_ktc", spec.srs.comb_ktc);
            spec.srs.n_srs_symbols = w.value("n_srs_symbols", spec.srs.n_srs_symbols);
            spec.srs.zc_root = w.value("zc_root", spec.srs.zc_root);
            if (w.contains("n_active_subcarriers")) {
                spec.srs.n_active_subcarriers = w.at("n_active_subcarriers").get<int>();
                spec.srs.fft_size = static_cast<int>(fft::next_power_of_two(
                    static_cast<std::size_t>(spec.srs.n_active_subcarriers)));
                spec.srs.sample_rate_hz = spec.srs.fft_size * spec.srs.subcarrier_spacing_hz();
            }
        }
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            int elements = g.value("elements", 3);
            double carrier = g.value("carrier_hz", 2.4e9);
            spec.geometry = UlaGeometry::half_wavelength(elements, carrier);
            if (g.contains("spacing_m")) spec.geometry.spacing_m = g.at("spacing_m").get<double>();
        }
        if (j.contains("paths")) {
            spec.paths.clear();
            for (const auto& p : j.at("paths")) {
                PathSpec ps;
                ps.theta_deg = p.value("theta_deg", 0.0);
                ps.rel_power = p.value("rel_power", 1.0);
                ps.phase_deg = p.value("phase_deg", 0.0);
                ps.delay_ns = p.value("delay_ns", 0.0);
                spec.paths.push_back(ps);
            }
        }
        if (j.contains("snr_grid_db"))
            spec.snr_grid_db = scenario_detail::parse_snr_grid(j.at("snr_grid_db"));
        spec.n_trials = j.value("n_trials", spec.n_trials);
        spec.rng_seed = j.value("seed", spec.rng_seed);
        spec.offset_samples = j.value("offset_samples", spec.offset_samples);
        spec.music_step_deg = j.value("music_step_deg", spec.music_step_deg);
        spec.m1 = j.value("m1", spec.m1);
        spec.m2 = j.value("m2", spec.m2);
        spec.detection_threshold = j.value("detection_threshold", spec.detection_threshold);
        if (j.contains("estimators")) {
            spec.estimators.clear();
            for (const auto& e : j.at("estimators"))
                spec.estimators.push_back(estimator_from_string(e.get<std::string>()));
        }
        if (j.contains("order_criteria")) {
            spec.order_criteria.clear();
            for (const auto& c : j.at("order_criteria"))
                spec.order_criteria.push_back(order_criterion_from_string(c.get<std::string>()));
        }
        if (j.contains("calibration")) {
            const auto& c = j.at("calibration");
            std::string mode = c.value("mode", "none");
            if (mode == "none") spec.calibration.mode = CalibrationMode::none;
            else if (mode == "p_only") spec.calibration.mode = CalibrationMode::p_only;
            else if (mode == "c_only") spec.calibration.mode = CalibrationMode::c_only;
            else if (mode == "p_and_c") spec.calibration.mode = CalibrationMode::p_and_c;
            else throw ConfigError("scenario: unknown calibration mode '" + mode + "'");
            spec.calibration.p_gain_db = c.value("p_gain_db", spec.calibration.p_gain_db);
            spec.calibration.p_phase_deg = c.value("p_phase_deg", spec.calibration.p_phase_deg);
            spec.calibration.c_phase_sigma =
                c.value("c_phase_sigma", spec.calibration.c_phase_sigma);
            if (c.value("c_phase_path_length", false))
                spec.calibration.c_phase_model = CouplingPhase::path_length;
            spec.calibration.resample_per_trial =
                c.value("resample_per_trial", spec.calibration.resample_per_trial);
        }
        if (j.contains("separations_deg")) {
            spec.separations_deg.clear();
            for (const auto& s : j.at("separations_deg"))
                spec.separations_deg.push_back(s.get<double>());
        }
        spec.mpc_rel_power = j.value("mpc_rel_power", spec.mpc_rel_power);
        spec.mpc_delay_ns = j.value("mpc_delay_ns", spec.mpc_delay_ns);
        spec.window_s = j.value("window_s", spec.window_s);
        spec.period_s = j.value("period_s", spec.period_s);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scenario parse error in " + path.string() + ": " + e.what());
    }
    return parse_scenario(j);
}

}  // namespace aoa
