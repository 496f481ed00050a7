#include "racebo/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "racebo/csv.hpp"

namespace racebo {

namespace {

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

RegressionData lap_regression_data(const TelemetryLog& log, const Config& cfg) {
    const auto truth =
        ground_truth_states(log.poses(), cfg.residual.sg_window, cfg.residual.sg_order);
    const int margin = cfg.residual.sg_window / 2 + 1;
    return prediction_errors(truth, log.inputs(), cfg.nominal, cfg.mpcc.dt, margin);
}

RegressionData concat(const std::vector<RegressionData>& parts) {
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.phi.rows();
    RegressionData out;
    out.phi.resize(total, 2);
    out.err_vy.resize(total);
    out.err_omega.resize(total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.phi.middleRows(at, p.phi.rows()) = p.phi;
        out.err_vy.segment(at, p.err_vy.size()) = p.err_vy;
        out.err_omega.segment(at, p.err_omega.size()) = p.err_omega;
        at += p.phi.rows();
    }
    return out;
}

ResidualModel fit_residual(const RegressionData& data, const Config& cfg) {
    return ResidualModel(blr_fit_auto(data.phi, data.err_vy, cfg.residual.prior_precision),
                         blr_fit_auto(data.phi, data.err_omega, cfg.residual.prior_precision));
}

}  // namespace

ModelLearningResult experiment_model_learning(const Config& cfg, const Track& track,
                                              uint64_t seed, const std::string& out_dir) {
    const ScenarioDef scenario = cfg.scenario(cfg.experiments.table1_scenario);
    SimSession session(track, cfg, scenario, Rng::derive(seed, 101));
    session.set_weights(
        {cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv, cfg.mpcc.q_lag});

    // telemetry pool driven with the nominal prediction model
    session.run_lap();  // standing-start lap, discarded
    std::vector<RegressionData> pool;
    std::vector<TelemetryLog> pool_logs;
    for (int i = 0; i < cfg.experiments.table1_pool_laps; ++i) {
        const LapResult lap = session.run_lap();
        if (!lap.completed) continue;
        pool_logs.push_back(lap.telemetry);
        pool.push_back(lap_regression_data(lap.telemetry, cfg));
    }
    if (pool.size() < 4) throw std::runtime_error("telemetry pool too small");

    // GP baseline on (vx, vy, omega, delta, tau); hyperparameters are fitted
    // on the first resample and reused
    auto gp_inputs = [&](const TelemetryLog& log, const RegressionData& data) {
        const auto truth =
            ground_truth_states(log.poses(), cfg.residual.sg_window, cfg.residual.sg_order);
        const auto inputs = log.inputs();
        const int margin = cfg.residual.sg_window / 2 + 1;
        Eigen::MatrixXd X(data.phi.rows(), 5);
        for (Eigen::Index r = 0; r < data.phi.rows(); ++r) {
            const int k = margin + static_cast<int>(r);
            X(r, 0) = truth[k].vx;
            X(r, 1) = truth[k].vy;
            X(r, 2) = truth[k].omega;
            X(r, 3) = inputs[k].delta;
            X(r, 4) = inputs[k].tau;
        }
        return X;
    };

    Rng rng(Rng::derive(seed, 102));
    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    GpHyper hyper_vy, hyper_om;
    bool hyper_ready = false;

    for (int r = 0; r < cfg.experiments.table1_resamples; ++r) {
        // two training laps and one test lap, distinct
        const int n = static_cast<int>(pool.size());
        int a = static_cast<int>(rng.uniform_index(n));
        int b = static_cast<int>(rng.uniform_index(n - 1));
        if (b >= a) ++b;
        int c = static_cast<int>(rng.uniform_index(n - 2));
        for (int k = 0; k < 2; ++k)
            if (c == std::min(a, b) || c == std::max(a, b)) ++c;

        const RegressionData train = concat({pool[a], pool[b]});
        const RegressionData& test = pool[c];

        auto rmse = [](const Eigen::VectorXd& e) { return std::sqrt(e.squaredNorm() / e.size()); };

        samples["none"]["vy"].push_back(rmse(test.err_vy) * 100.0);
        samples["none"]["omega"].push_back(rmse(test.err_omega));

        const ResidualModel blr = fit_residual(train, cfg);
        Eigen::VectorXd res_vy = test.err_vy, res_om = test.err_omega;
        for (Eigen::Index i = 0; i < test.phi.rows(); ++i) {
            const Eigen::Vector2d g = blr.mean(test.phi.row(i).transpose());
            res_vy[i] -= g[0];
            res_om[i] -= g[1];
        }
        samples["blr"]["vy"].push_back(rmse(res_vy) * 100.0);
        samples["blr"]["omega"].push_back(rmse(res_om));

        // GP baseline, subsampled for tractability
        const Eigen::MatrixXd Xa = gp_inputs(pool_logs[a], pool[a]);
        const Eigen::MatrixXd Xb = gp_inputs(pool_logs[b], pool[b]);
        Eigen::MatrixXd Xtr(Xa.rows() + Xb.rows(), 5);
        Xtr << Xa, Xb;
        Eigen::VectorXd ytr_vy(Xtr.rows()), ytr_om(Xtr.rows());
        ytr_vy << pool[a].err_vy, pool[b].err_vy;
        ytr_om << pool[a].err_omega, pool[b].err_omega;

        const int keep = std::min<int>(cfg.experiments.table1_gp_subsample,
                                       static_cast<int>(Xtr.rows()));
        const int stride = std::max<Eigen::Index>(1, Xtr.rows() / keep);
        std::vector<int> idx;
        for (Eigen::Index i = 0; i < Xtr.rows() && static_cast<int>(idx.size()) < keep;
             i += stride)
            idx.push_back(static_cast<int>(i));
        Eigen::MatrixXd Xs(idx.size(), 5);
        Eigen::VectorXd ys_vy(idx.size()), ys_om(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            Xs.row(i) = Xtr.row(idx[i]);
            ys_vy[i] = ytr_vy[idx[i]];
            ys_om[i] = ytr_om[idx[i]];
        }

        GpRegressor gp_vy(5), gp_om(5);
        gp_vy.set_data(Xs, ys_vy);
        gp_om.set_data(Xs, ys_om);
        if (!hyper_ready) {
            GpHyperBounds b5;
            b5.lengthscale_min = Eigen::VectorXd::Constant(5, 0.05);
            b5.lengthscale_max = Eigen::VectorXd::Constant(5, 10.0);
            b5.noise_var_min = 1e-10;
            b5.noise_var_max = 1.0;
            GpHyper h0;
            h0.lengthscales = Eigen::VectorXd::Constant(5, 1.0);
            h0.signal_var = std::max(1e-8, ys_vy.squaredNorm() / ys_vy.size());
            h0.noise_var = 0.1 * h0.signal_var;
            gp_vy.set_hyper(h0);
            gp_vy.fit_hyperparameters(b5, Rng::derive(seed, 103));
            h0.signal_var = std::max(1e-8, ys_om.squaredNorm() / ys_om.size());
            h0.noise_var = 0.1 * h0.signal_var;
            gp_om.set_hyper(h0);
            gp_om.fit_hyperparameters(b5, Rng::derive(seed, 104));
            hyper_vy = gp_vy.hyper();
            hyper_om = gp_om.hyper();
            hyper_ready = true;
        } else {
            gp_vy.set_hyper(hyper_vy);
            gp_om.set_hyper(hyper_om);
        }

        const Eigen::MatrixXd Xte = gp_inputs(pool_logs[c], pool[c]);
        Eigen::VectorXd gres_vy = test.err_vy, gres_om = test.err_omega;
        for (Eigen::Index i = 0; i < Xte.rows(); ++i) {
            double mu, var;
            gp_vy.posterior(Xte.row(i), mu, var);
            gres_vy[i] -= mu;
            gp_om.posterior(Xte.row(i), mu, var);
            gres_om[i] -= mu;
        }
        samples["gp"]["vy"].push_back(rmse(gres_vy) * 100.0);
        samples["gp"]["omega"].push_back(rmse(gres_om));
    }

    ModelLearningResult out;
    out.resamples = cfg.experiments.table1_resamples;
    for (const auto& [model, states] : samples)
        for (const auto& [state, vals] : states)
            out.rmse[model][state] = {mean_of(vals), std_of(vals)};

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        CsvWriter w(out_dir + "/prediction_errors.csv",
                    {"model", "state", "mean_rmse", "std_rmse", "unit"});
        for (const auto& [model, states] : out.rmse)
            for (const auto& [state, ms] : states)
                w.write_row_strings({model, state, format_double(ms.first),
                                     format_double(ms.second),
                                     state == "vy" ? "cm/s" : "rad/s"});
    }
    return out;
}

ThreeSettingsResult experiment_three_settings(const Config& cfg, const Track& track,
                                              uint64_t seed, const std::string& out_dir) {
    const ScenarioDef scenario = cfg.scenario(cfg.experiments.three_settings_scenario);
    const ControllerWeights detuned{cfg.experiments.detuned_q_cont,
                                    cfg.experiments.detuned_q_adv, cfg.mpcc.q_lag};
    const ControllerWeights tuned{cfg.experiments.tuned_q_cont, cfg.experiments.tuned_q_adv,
                                  cfg.mpcc.q_lag};
    const int laps = cfg.experiments.three_settings_laps;

    ThreeSettingsResult out;
    out.settings[0].name = "nominal_detuned";
    out.settings[1].name = "learned_detuned";
    out.settings[2].name = "learned_tuned";

    // setting 1 also provides the residual training laps for settings 2 and 3
    ResidualModel learned;
    std::vector<std::vector<Vec2>> positions(3);

    for (int s = 0; s < 3; ++s) {
        SimSession session(track, cfg, scenario, Rng::derive(seed, 200 + s));
        session.set_weights(s == 0 ? detuned : (s == 1 ? detuned : tuned));
        if (s > 0) session.set_residual(learned);

        session.run_lap();  // standing start, discarded
        std::vector<RegressionData> train;
        for (int i = 0; i < laps; ++i) {
            const LapResult lap = session.run_lap();
            if (!lap.completed) {
                ++out.settings[s].aborted;
                continue;
            }
            out.settings[s].laptimes.push_back(lap.laptime);
            out.settings[s].devs_cm.push_back(lap.mean_abs_cont_cm);
            out.settings[s].boundary_violations += lap.boundary_violations;
            positions[s].insert(positions[s].end(), lap.positions.begin(),
                                lap.positions.end());
            if (s == 0 && train.size() < 2)
                train.push_back(lap_regression_data(lap.telemetry, cfg));
        }
        if (s == 0) {
            if (train.size() < 2) throw std::runtime_error("setting 1 produced too few laps");
            learned = fit_residual(concat(train), cfg);
        }
        out.settings[s].mean_laptime = mean_of(out.settings[s].laptimes);
        out.settings[s].mean_dev_cm = mean_of(out.settings[s].devs_cm);
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        {
            CsvWriter w(out_dir + "/three_settings_laps.csv",
                        {"setting", "lap", "laptime", "dev_cm"});
            for (int s = 0; s < 3; ++s)
                for (size_t i = 0; i < out.settings[s].laptimes.size(); ++i)
                    w.write_row_strings({out.settings[s].name, std::to_string(i + 1),
                                         format_double(out.settings[s].laptimes[i]),
                                         format_double(out.settings[s].devs_cm[i])});
        }
        {
            CsvWriter w(out_dir + "/three_settings_positions.csv", {"setting", "x", "y"});
            for (int s = 0; s < 3; ++s)
                for (const auto& p : positions[s])
                    w.write_row_strings({out.settings[s].name, format_double(p.x),
                                         format_double(p.y)});
        }
    }
    return out;
}

SurfaceResult experiment_response_surface(const Config& cfg, const Track& track,
                                          const std::string& scenario_name, uint64_t seed,
                                          int n_sobol, int n_ucb, const std::string& out_dir) {
    const ScenarioDef scenario = cfg.scenario(scenario_name);
    SimTuningEnv env(track, cfg, scenario, Rng::derive(seed, 300));

    TuningRunConfig rc;
    rc.mode = "contextual";  // the architecture keeps learning while scanning
    rc.iterations = n_sobol + n_ucb;
    rc.seed = seed;
    rc.domain = cfg.domain;
    rc.bo = cfg.bo;
    rc.sobol_override = n_sobol;
    const std::vector<TuningRecord> records = run_tuning(env, rc, {});

    // context-free surface fit over theta for reporting
    TuningSurrogate surface(cfg.domain, cfg.bo, false);
    surface.set_records(records);
    surface.fit_hyperparameters(seed);

    SurfaceResult out;
    out.records = records;
    out.argmin = surface.suggest(Eigen::Vector4d::Zero(), 0.0);  // beta 0: posterior-mean argmin
    double var;
    surface.posterior(out.argmin, Eigen::Vector4d::Zero(), out.argmin_value, var);

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        save_records_csv(out_dir + "/surface_records_" + scenario_name + ".csv", records);
        CsvWriter w(out_dir + "/surface_grid_" + scenario_name + ".csv",
                    {"q_cont", "q_adv", "mean", "std"});
        const int g = cfg.bo.grid_n;
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j) {
                ThetaPoint t{cfg.domain.q_cont_min +
                                 (cfg.domain.q_cont_max - cfg.domain.q_cont_min) * i / (g - 1),
                             cfg.domain.q_adv_min +
                                 (cfg.domain.q_adv_max - cfg.domain.q_adv_min) * j / (g - 1)};
                double mu, v;
                surface.posterior(t, Eigen::Vector4d::Zero(), mu, v);
                w.write_row({t.q_cont, t.q_adv, mu, std::sqrt(std::max(0.0, v))});
            }
    }
    return out;
}

ClusterResult experiment_context_clusters(const Config& cfg, const Track& track, int laps,
                                          uint64_t seed, const std::string& out_dir) {
    ClusterResult out;
    out.scenarios = cfg.scenario_names();
    out.contexts.resize(out.scenarios.size());

    for (size_t si = 0; si < out.scenarios.size(); ++si) {
        const ScenarioDef scenario = cfg.scenario(out.scenarios[si]);
        SimSession session(track, cfg, scenario, Rng::derive(seed, 400 + si));
        session.set_weights(
            {cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv, cfg.mpcc.q_lag});
        session.set_gamma_cap(cfg.experiments.collect_gamma_max);
        session.run_lap();  // standing start
        // warm up the joint loop: fit and install a first residual so recorded
        // contexts all come from learned-model driving
        {
            const LapResult warm = session.run_lap();
            if (warm.completed) {
                try {
                    const ContextResult ctx = context_from_lap(warm.telemetry, cfg.nominal,
                                                               cfg.residual, cfg.mpcc.dt);
                    session.set_residual(ctx.model);
                } catch (const std::exception&) {
                }
            }
        }
        int attempts = 0;
        while (static_cast<int>(out.contexts[si].size()) < laps && attempts < 3 * laps) {
            ++attempts;
            const LapResult lap = session.run_lap();
            if (!lap.completed) continue;
            try {
                const ContextResult ctx =
                    context_from_lap(lap.telemetry, cfg.nominal, cfg.residual, cfg.mpcc.dt);
                out.contexts[si].push_back(ctx.context);
                session.set_residual(ctx.model);  // keep the joint loop running
            } catch (const std::exception&) {
            }
        }
    }

    // separability statistics
    std::vector<Eigen::Vector4d> centroids;
    double max_rms = 0.0;
    for (const auto& ctxs : out.contexts) {
        Eigen::Vector4d c = Eigen::Vector4d::Zero();
        for (const auto& v : ctxs) c += v;
        if (!ctxs.empty()) c /= static_cast<double>(ctxs.size());
        centroids.push_back(c);
        double rms = 0.0;
        for (const auto& v : ctxs) rms += (v - c).squaredNorm();
        if (!ctxs.empty()) rms = std::sqrt(rms / static_cast<double>(ctxs.size()));
        max_rms = std::max(max_rms, rms);
    }
    double min_dist = 1e300;
    for (size_t i = 0; i < centroids.size(); ++i)
        for (size_t j = i + 1; j < centroids.size(); ++j)
            min_dist = std::min(min_dist, (centroids[i] - centroids[j]).norm());
    out.min_centroid_distance = min_dist;
    out.max_within_std = max_rms;

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        CsvWriter w(out_dir + "/context_clusters.csv",
                    {"scenario", "lap", "c1", "c2", "c3", "c4"});
        for (size_t si = 0; si < out.scenarios.size(); ++si)
            for (size_t k = 0; k < out.contexts[si].size(); ++k) {
                const auto& c = out.contexts[si][k];
                w.write_row_strings({out.scenarios[si], std::to_string(k + 1),
                                     format_double(c[0]), format_double(c[1]),
                                     format_double(c[2]), format_double(c[3])});
            }
    }
    return out;
}

std::vector<double> TransferResult::best_so_far(const std::string& scenario,
                                                const std::string& mode, uint64_t seed) const {
    for (const auto& run : runs) {
        if (run.scenario == scenario && run.mode == mode && run.seed == seed) {
            std::vector<double> out;
            double best = 1e300;
            for (const auto& r : run.records) {
                best = std::min(best, r.objective);
                out.push_back(best);
            }
            return out;
        }
    }
    return {};
}

TransferResult experiment_transfer(const Config& cfg, const Track& track,
                                   const std::vector<std::string>& order, int iterations,
                                   int n_seeds, uint64_t seed, const std::string& out_dir) {
    TransferResult out;
    std::vector<TuningRecord> accumulated;  // pretraining data, in scenario order

    for (size_t si = 0; si < order.size(); ++si) {
        const ScenarioDef scenario = cfg.scenario(order[si]);

        for (int k = 0; k < n_seeds; ++k) {
            const uint64_t run_seed = Rng::derive(seed, 1000 + 10 * si + k);

            TuningRunConfig rc;
            rc.iterations = iterations;
            rc.domain = cfg.domain;
            rc.bo = cfg.bo;

            {
                SimTuningEnv env(track, cfg, scenario, Rng::derive(run_seed, 1));
                rc.mode = "standard";
                rc.seed = run_seed;
                out.runs.push_back(
                    {order[si], "standard", run_seed, run_tuning(env, rc, {})});
            }
            {
                SimTuningEnv env(track, cfg, scenario, Rng::derive(run_seed, 2));
                rc.mode = "contextual";
                rc.seed = run_seed;
                out.runs.push_back(
                    {order[si], "contextual", run_seed, run_tuning(env, rc, accumulated)});
            }
        }

        // extend the pretraining pool with this scenario's first contextual run
        for (const auto& run : out.runs)
            if (run.scenario == order[si] && run.mode == "contextual") {
                accumulated.insert(accumulated.end(), run.records.begin(), run.records.end());
                break;
            }
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        CsvWriter w(out_dir + "/transfer_records.csv",
                    {"scenario", "mode", "seed", "iter", "q_cont", "q_adv", "J", "laptime",
                     "centerline_dev", "best_so_far"});
        for (const auto& run : out.runs) {
            double best = 1e300;
            for (const auto& r : run.records) {
                best = std::min(best, r.objective);
                w.write_row_strings({run.scenario, run.mode, std::to_string(run.seed),
                                     std::to_string(r.iter), format_double(r.theta.q_cont),
                                     format_double(r.theta.q_adv), format_double(r.objective),
                                     format_double(r.laptime),
                                     format_double(r.centerline_dev), format_double(best)});
            }
        }
    }
    return out;
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const Config& cfg, const std::string& track_path, uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
    ensure_dir(out_dir);
    std::ofstream f(out_dir + "/manifest.txt");
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    f << "subcommand=" << subcommand << '\n';
    f << "config_hash=" << hex << '\n';
    f << "track=" << track_path << '\n';
    f << "seed=" << seed << '\n';
    for (const auto& [k, v] : extra) f << k << '=' << v << '\n';
}

}  // namespace racebo
