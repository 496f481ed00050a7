#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "racebo/csv.hpp"
#include "racebo/experiments.hpp"
#include "racebo/sim.hpp"

using namespace racebo;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string track_path = "data/tracks/demo_track.csv";
    std::string scenario = "nominal";
    std::string out_dir;
    std::string mode = "standard";
    uint64_t seed = 0;
    int iters = -1;
    int laps = 5;
};

void add_common(CLI::App* cmd, CommonArgs& a, const std::string& default_out) {
    a.out_dir = default_out;
    cmd->add_option("--config", a.config_path, "config file (ini)");
    cmd->add_option("--track", a.track_path, "track csv");
    cmd->add_option("--scenario", a.scenario, "scenario name");
    cmd->add_option("--seed", a.seed, "random seed");
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--mode", a.mode, "standard|contextual")
        ->check(CLI::IsMember({"standard", "contextual"}));
    cmd->add_option("--iters", a.iters, "tuning iterations");
    cmd->add_option("--laps", a.laps, "laps to simulate");
}

Config load_config(const CommonArgs& a) {
    return a.config_path.empty() ? Config::defaults() : Config::from_file(a.config_path);
}

void validate_scenario(const Config& cfg, const std::string& name) {
    for (const auto& s : cfg.scenario_names())
        if (s == name) return;
    throw CLI::ValidationError("--scenario", "unknown scenario: " + name);
}

int run_simulate(const CommonArgs& a) {
    const Config cfg = load_config(a);
    validate_scenario(cfg, a.scenario);
    const Track track = Track::load(a.track_path);
    write_manifest(a.out_dir, "simulate", cfg, a.track_path, a.seed,
                   {{"scenario", a.scenario},
                    {"mode", a.mode},
                    {"laps", std::to_string(a.laps)}});

    SimSession session(track, cfg, cfg.scenario(a.scenario), a.seed);
    session.set_weights(
        {cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv, cfg.mpcc.q_lag});

    CsvWriter laps_csv(a.out_dir + "/laps.csv",
                       {"lap", "completed", "laptime", "dev_cm", "violations", "J"});
    CsvWriter ctx_csv(a.out_dir + "/contexts.csv", {"lap", "c1", "c2", "c3", "c4"});
    TelemetryLog all;
    for (int lap = 1; lap <= a.laps; ++lap) {
        const LapResult r = session.run_lap();
        laps_csv.write_row({static_cast<double>(lap), r.completed ? 1.0 : 0.0, r.laptime,
                            r.mean_abs_cont_cm, static_cast<double>(r.boundary_violations),
                            r.completed ? lap_objective(r, cfg.objective.lambda) : 0.0});
        for (const auto& row : r.telemetry.rows) all.rows.push_back(row);
        if (a.mode == "contextual" && r.completed) {
            try {
                const ContextResult ctx =
                    context_from_lap(r.telemetry, cfg.nominal, cfg.residual, cfg.mpcc.dt);
                session.set_residual(ctx.model);
                ctx_csv.write_row({static_cast<double>(lap), ctx.context[0], ctx.context[1],
                                   ctx.context[2], ctx.context[3]});
            } catch (const std::exception&) {
            }
        }
    }
    all.save(a.out_dir + "/telemetry.csv");
    return 0;
}

int run_tune(const CommonArgs& a) {
    const Config cfg = load_config(a);
    validate_scenario(cfg, a.scenario);
    const Track track = Track::load(a.track_path);
    const int iters = a.iters > 0 ? a.iters : cfg.experiments.fig7_iters;
    write_manifest(a.out_dir, "tune", cfg, a.track_path, a.seed,
                   {{"scenario", a.scenario},
                    {"mode", a.mode},
                    {"iters", std::to_string(iters)}});

    SimTuningEnv env(track, cfg, cfg.scenario(a.scenario), a.seed);
    TuningRunConfig rc;
    rc.mode = a.mode;
    rc.iterations = iters;
    rc.seed = a.seed;
    rc.domain = cfg.domain;
    rc.bo = cfg.bo;
    const auto records = run_tuning(env, rc, {});
    save_records_csv(a.out_dir + "/history.csv", records);
    return 0;
}

int run_table1(const CommonArgs& a) {
    const Config cfg = load_config(a);
    const Track track = Track::load(a.track_path);
    write_manifest(a.out_dir, "table1", cfg, a.track_path, a.seed, {});
    const ModelLearningResult res = experiment_model_learning(cfg, track, a.seed, a.out_dir);
    for (const auto& [model, states] : res.rmse)
        for (const auto& [state, ms] : states)
            std::printf("%-5s %-6s rmse %.4f +- %.4f %s\n", model.c_str(), state.c_str(),
                        ms.first, ms.second, state == "vy" ? "cm/s" : "rad/s");
    return 0;
}

int run_fig4(const CommonArgs& a) {
    const Config cfg = load_config(a);
    const Track track = Track::load(a.track_path);
    write_manifest(a.out_dir, "fig4", cfg, a.track_path, a.seed, {});
    const ThreeSettingsResult res = experiment_three_settings(cfg, track, a.seed, a.out_dir);
    for (const auto& s : res.settings)
        std::printf("%-16s mean laptime %.3f s  mean dev %.2f cm  aborted %d\n",
                    s.name.c_str(), s.mean_laptime, s.mean_dev_cm, s.aborted);
    return 0;
}

int run_fig5(const CommonArgs& a, bool scenario_given) {
    const Config cfg = load_config(a);
    const Track track = Track::load(a.track_path);
    write_manifest(a.out_dir, "fig5", cfg, a.track_path, a.seed,
                   {{"scenario", scenario_given ? a.scenario : "all"}});
    std::vector<std::string> scenarios =
        scenario_given ? std::vector<std::string>{a.scenario} : cfg.scenario_names();
    for (const auto& name : scenarios) {
        validate_scenario(cfg, name);
        const SurfaceResult res = experiment_response_surface(
            cfg, track, name, a.seed, cfg.experiments.fig5_sobol, cfg.experiments.fig5_ucb,
            a.out_dir);
        std::printf("%-11s estimated optimum (q_cont=%.1f, q_adv=%.2f), J=%.3f\n",
                    name.c_str(), res.argmin.q_cont, res.argmin.q_adv, res.argmin_value);
    }
    return 0;
}

int run_fig7(const CommonArgs& a) {
    const Config cfg = load_config(a);
    const Track track = Track::load(a.track_path);
    const int iters = a.iters > 0 ? a.iters : cfg.experiments.fig7_iters;
    write_manifest(a.out_dir, "fig7", cfg, a.track_path, a.seed,
                   {{"iters", std::to_string(iters)},
                    {"seeds", std::to_string(cfg.experiments.fig7_seeds)}});
    const TransferResult res =
        experiment_transfer(cfg, track, cfg.scenario_names(), iters,
                            cfg.experiments.fig7_seeds, a.seed, a.out_dir);
    for (const auto& run : res.runs) {
        double best = 1e300;
        for (const auto& r : run.records) best = std::min(best, r.objective);
        std::printf("%-11s %-10s seed %llu best J %.3f\n", run.scenario.c_str(),
                    run.mode.c_str(), static_cast<unsigned long long>(run.seed), best);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contouring-control tuning testbed"};
    app.require_subcommand(1);

    CommonArgs sim_args, tune_args, t1_args, f4_args, f5_args, f7_args;
    auto* sim = app.add_subcommand("simulate", "drive laps at fixed weights");
    add_common(sim, sim_args, "out/simulate");
    auto* tune = app.add_subcommand("tune", "run one tuning session");
    add_common(tune, tune_args, "out/tune");
    auto* t1 = app.add_subcommand("table1", "prediction-error comparison");
    add_common(t1, t1_args, "out/table1");
    auto* f4 = app.add_subcommand("fig4", "three-settings comparison");
    add_common(f4, f4_args, "out/fig4");
    auto* f5 = app.add_subcommand("fig5", "objective response surfaces");
    add_common(f5, f5_args, "out/fig5");
    auto* f7 = app.add_subcommand("fig7", "contextual vs standard tuning");
    add_common(f7, f7_args, "out/fig7");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage error
    }

    try {
        if (sim->parsed()) return run_simulate(sim_args);
        if (tune->parsed()) return run_tune(tune_args);
        if (t1->parsed()) return run_table1(t1_args);
        if (f4->parsed()) return run_fig4(f4_args);
        if (f5->parsed()) return run_fig5(f5_args, f5->count("--scenario") > 0);
        if (f7->parsed()) return run_fig7(f7_args);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
