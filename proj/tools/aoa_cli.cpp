// srs-aoa command line front end: Monte-Carlo studies, capture synthesis and
// replay, bound tables.

#include <cinttypes>
#include <cstdio>

#include <CLI11.hpp>

#include "aoa/capture_io.hpp"
#include "aoa/experiments.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    std::string estimator;
    std::string order;
};

void apply_overrides(aoa::ScenarioSpec& spec, const CommonFlags& flags) {
    if (flags.seed_set) spec.rng_seed = flags.seed;
    if (!flags.estimator.empty()) {
        if (flags.estimator == "all")
            spec.estimators = {aoa::Estimator::music, aoa::Estimator::esprit,
                               aoa::Estimator::esprit2d};
        else
            spec.estimators = {aoa::estimator_from_string(flags.estimator)};
    }
    if (!flags.order.empty())
        spec.order_criteria = {aoa::order_criterion_from_string(flags.order)};
}

int resolve_workers(int workers) {
    if (workers > 0) return workers;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

int cmd_simulate(const CommonFlags& flags, const std::string& dump_path) {
    aoa::ScenarioSpec spec = aoa::load_scenario(flags.config_path);
    apply_overrides(spec, flags);
    aoa::StudyOutcomes outcomes;
    aoa::CurveTable table =
        aoa::run_study(spec, resolve_workers(flags.workers), &outcomes);
    std::string out = flags.out_path.empty() ? "results.csv" : flags.out_path;
    aoa::emit_results(table, out);
    if (!dump_path.empty()) aoa::dump_trials(spec, outcomes, dump_path);
    std::printf("%s study: %zu rows -> %s\n", aoa::to_string(spec.study),
                table.rows.size(), out.c_str());
    return 0;
}

int cmd_synthesize(const CommonFlags& flags, int case_index, int snr_index, int trial,
                   int n_slots) {
    aoa::ScenarioSpec spec = aoa::load_scenario(flags.config_path);
    apply_overrides(spec, flags);
    auto cases = aoa::study_cases(spec);
    if (case_index < 0 || case_index >= static_cast<int>(cases.size()))
        throw aoa::ConfigError("synthesize: case index out of range");
    if (snr_index < 0 || snr_index >= static_cast<int>(spec.snr_grid_db.size()))
        throw aoa::ConfigError("synthesize: snr index out of range");
    if (n_slots < 1) throw aoa::ConfigError("synthesize: need at least one slot");

    aoa::SlotPipeline pipeline(spec.pipeline_config());
    aoa::RxCapture rx = aoa::make_trial_capture(
        spec, pipeline, cases[static_cast<std::size_t>(case_index)],
        spec.snr_grid_db[static_cast<std::size_t>(snr_index)],
        static_cast<std::uint64_t>(snr_index), static_cast<std::uint64_t>(trial), n_slots);
    std::string out = flags.out_path.empty() ? "capture.bin" : flags.out_path;
    aoa::write_capture(out, rx, spec.geometry.carrier_hz);
    std::printf("capture: %d channels x %zu samples @ %.6g Msps (case %d, snr %g dB, "
                "trial %d) -> %s\n",
                rx.n_channels(), rx.n_samples(), rx.sample_rate_hz / 1e6, case_index,
                spec.snr_grid_db[static_cast<std::size_t>(snr_index)], trial, out.c_str());
    return 0;
}

int cmd_process(const CommonFlags& flags, const std::string& capture_path, int k_true) {
    aoa::ScenarioSpec spec = aoa::load_scenario(flags.config_path);
    apply_overrides(spec, flags);
    auto [header, rx] = aoa::read_capture(capture_path);
    if (static_cast<int>(header.n_channels) != spec.geometry.m_elements)
        throw aoa::ConfigError("process: capture has " + std::to_string(header.n_channels) +
                               " channels, scenario array has " +
                               std::to_string(spec.geometry.m_elements));

    aoa::SlotPipeline pipeline(spec.pipeline_config());
    aoa::ProcessOptions opt;
    opt.plan.window_s = spec.window_s;
    opt.plan.period_s = spec.period_s;
    opt.estimators = spec.estimators;
    opt.criterion = spec.order_criteria.empty() ? aoa::OrderCriterion::aic
                                                : spec.order_criteria.front();
    opt.ground_truth_k = k_true > 0 ? k_true : std::max<int>(1, spec.paths.size());
    auto windows = aoa::process_capture(rx, pipeline, opt);

    std::string out = flags.out_path.empty() ? "process.csv" : flags.out_path;
    std::FILE* f = std::fopen(out.c_str(), "wb");
    if (!f) throw aoa::IoError("process: cannot open " + out);
    std::fputs("window,t_start_s,flagged,n_slots,order,estimator,angle_deg\n", f);
    for (const auto& w : windows)
        for (aoa::Estimator est : opt.estimators) {
            auto it = w.angle_deg.find(est);
            std::fprintf(f, "%d,%.10g,%d,%d,%d,%s,", w.window_index, w.t_start_s,
                         w.flagged ? 1 : 0, w.n_slots, w.order, aoa::to_string(est));
            if (it != w.angle_deg.end())
                std::fprintf(f, "%.12g\n", it->second);
            else
                std::fputs("\n", f);
        }
    if (std::fclose(f) != 0) throw aoa::IoError("process: write failed for " + out);
    std::printf("processed %zu windows -> %s\n", windows.size(), out.c_str());
    return 0;
}

int cmd_crb(double snr_start, double snr_stop, double snr_step, long n_snapshots,
            double theta_deg, int elements, double carrier_hz, double spacing_m,
            const std::string& out_path) {
    aoa::UlaGeometry geom = aoa::UlaGeometry::half_wavelength(elements, carrier_hz);
    if (spacing_m > 0.0) geom.spacing_m = spacing_m;
    if (snr_step <= 0.0) throw aoa::ConfigError("crb: snr step must be positive");

    std::FILE* f = stdout;
    if (!out_path.empty()) {
        f = std::fopen(out_path.c_str(), "wb");
        if (!f) throw aoa::IoError("crb: cannot open " + out_path);
    }
    std::fputs("snr_db,crb_deg2,crb_rmse_deg\n", f);
    for (double snr = snr_start; snr <= snr_stop + 1e-9; snr += snr_step) {
        double var = aoa::crb_single_source(geom, snr, n_snapshots, theta_deg);
        std::fprintf(f, "%.10g,%.10g,%.10g\n", snr, var, std::sqrt(var));
    }
    if (f != stdout && std::fclose(f) != 0)
        throw aoa::IoError("crb: write failed for " + out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"srs-aoa: single-anchor uplink AoA estimation toolbox"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string dump_path, capture_path;
    int case_index = 0, snr_index = 0, trial = 0, n_slots = 1, k_true = 0;
    double snr_start = -10, snr_stop = 30, snr_step = 5, theta_deg = 0, carrier_hz = 2.4e9,
           spacing_m = 0;
    long n_snapshots = 3192;
    int elements = 3;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", flags.config_path, "scenario JSON file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", flags.out_path, "output path");
        cmd->add_option("--seed", flags.seed, "override the scenario RNG seed")
            ->each([&](const std::string&) { flags.seed_set = true; });
        cmd->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
        cmd->add_option("--estimator", flags.estimator, "music|esprit|esprit2d|all")
            ->check(CLI::IsMember({"music", "esprit", "esprit2d", "all"}));
        cmd->add_option("--order", flags.order, "aic|mdl|ecod|true")
            ->check(CLI::IsMember({"aic", "mdl", "ecod", "true"}));
    };

    auto* sim = app.add_subcommand("simulate", "run a Monte-Carlo scenario, write CSV");
    add_common(sim, true);
    sim->add_option("--dump-trials", dump_path, "also write per-trial records");

    auto* synth = app.add_subcommand("synthesize", "write a synthetic capture for a scenario");
    add_common(synth, true);
    synth->add_option("--case", case_index, "study case index");
    synth->add_option("--snr-index", snr_index, "index into the scenario SNR grid");
    synth->add_option("--trial", trial, "trial index (fixes the RNG stream)");
    synth->add_option("--slots", n_slots, "number of back-to-back slots");

    auto* proc = app.add_subcommand("process", "run the estimation pipeline over a capture");
    add_common(proc, true);
    proc->add_option("--capture", capture_path, "capture file")
        ->required()
        ->check(CLI::ExistingFile);
    proc->add_option("--k", k_true, "ground-truth order when --order true");

    auto* crb = app.add_subcommand("crb", "print the single-source bound table");
    crb->add_option("--snr-start", snr_start);
    crb->add_option("--snr-stop", snr_stop);
    crb->add_option("--snr-step", snr_step);
    crb->add_option("--n", n_snapshots, "snapshot count");
    crb->add_option("--theta", theta_deg, "source angle [deg]");
    crb->add_option("--elements", elements);
    crb->add_option("--carrier", carrier_hz);
    crb->add_option("--spacing", spacing_m, "element spacing [m] (default half wavelength)");
    crb->add_option("--out", flags.out_path, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(flags, dump_path);
        if (synth->parsed()) return cmd_synthesize(flags, case_index, snr_index, trial, n_slots);
        if (proc->parsed()) return cmd_process(flags, capture_path, k_true);
        if (crb->parsed())
            return cmd_crb(snr_start, snr_stop, snr_step, n_snapshots, theta_deg, elements,
                           carrier_hz, spacing_m, flags.out_path);
    } catch (const aoa::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aoa::DimensionError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aoa::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const aoa::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
