#include "racebo/tuning.hpp"

#include <cmath>

#include "racebo/csv.hpp"
#include "racebo/sobol.hpp"

namespace racebo {

TuningSurrogate::TuningSurrogate(const TuningDomain& domain, const BoConfig& bo,
                                 bool contextual)
    : domain_(domain), bo_(bo), contextual_(contextual), gp_(contextual ? 6 : 2) {
    GpHyper h;
    h.signal_var = 1.0;
    h.lengthscales = Eigen::VectorXd::Constant(gp_.dim(), 0.3);
    if (contextual) h.lengthscales.tail(4).setConstant(2.0);
    h.noise_var = std::max(bo.noise_floor_var, 1e-4);
    gp_.set_hyper(h);
}

Eigen::VectorXd TuningSurrogate::encode(const ThetaPoint& theta,
                                        const Eigen::Vector4d& context) const {
    Eigen::VectorXd x(gp_.dim());
    x[0] = (theta.q_cont - domain_.q_cont_min) / (domain_.q_cont_max - domain_.q_cont_min);
    x[1] = (theta.q_adv - domain_.q_adv_min) / (domain_.q_adv_max - domain_.q_adv_min);
    if (contextual_)
        for (int d = 0; d < 4; ++d) x[2 + d] = (context[d] - ctx_mean_[d]) / ctx_scale_[d];
    return x;
}

void TuningSurrogate::set_records(const std::vector<TuningRecord>& records) {
    const int n = static_cast<int>(records.size());
    if (contextual_ && n > 0) {
        // standardize contexts by the running statistics of the observed data
        Eigen::Vector4d mean = Eigen::Vector4d::Zero();
        for (const auto& r : records) mean += r.context;
        mean /= n;
        Eigen::Vector4d var = Eigen::Vector4d::Zero();
        for (const auto& r : records) var += (r.context - mean).cwiseAbs2();
        var /= std::max(1, n - 1);
        ctx_mean_ = mean;
        for (int d = 0; d < 4; ++d) {
            const double sd = std::sqrt(var[d]);
            ctx_scale_[d] = sd > 1e-9 * (1.0 + std::abs(mean[d])) ? sd : 1.0;
        }
    }
    Eigen::MatrixXd X(n, gp_.dim());
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X.row(i) = encode(records[i].theta, records[i].context).transpose();
        y[i] = records[i].objective;
    }
    gp_.set_data(X, y);
}

void TuningSurrogate::fit_hyperparameters(uint64_t seed) {
    if (gp_.size() < 5) return;
    const double vy = std::max((gp_.targets().array() - gp_.targets().mean()).square().mean(),
                               1e-10);
    GpHyperBounds b;
    b.signal_var_min = 1e-4 * vy;
    b.signal_var_max = 1e2 * vy;
    b.lengthscale_min = Eigen::VectorXd::Constant(gp_.dim(), bo_.lengthscale_theta_min);
    b.lengthscale_max = Eigen::VectorXd::Constant(gp_.dim(), bo_.lengthscale_theta_max);
    if (contextual_) {
        b.lengthscale_min.tail(4).setConstant(bo_.lengthscale_ctx_min);
        b.lengthscale_max.tail(4).setConstant(bo_.lengthscale_ctx_max);
    }
    b.noise_var_min = bo_.noise_floor_var;
    b.noise_var_max = std::max(vy, 2.0 * bo_.noise_floor_var);
    gp_.fit_hyperparameters(b, seed);
}

void TuningSurrogate::posterior(const ThetaPoint& theta, const Eigen::Vector4d& context,
                                double& mean, double& var) const {
    gp_.posterior(encode(theta, context), mean, var);
}

double TuningSurrogate::acquisition(const ThetaPoint& theta, const Eigen::Vector4d& context,
                                    double beta) const {
    double mu, var;
    posterior(theta, context, mu, var);
    return mu - beta * std::sqrt(var);
}

ThetaPoint TuningSurrogate::suggest(const Eigen::Vector4d& context, double beta) const {
    const double c0 = domain_.q_cont_min, c1 = domain_.q_cont_max;
    const double a0 = domain_.q_adv_min, a1 = domain_.q_adv_max;
    if (gp_.size() == 0) return {0.5 * (c0 + c1), 0.5 * (a0 + a1)};

    const int g = std::max(2, bo_.grid_n);
    ThetaPoint best{c0, a0};
    double best_v = 1e300;
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            const ThetaPoint t{c0 + (c1 - c0) * i / (g - 1), a0 + (a1 - a0) * j / (g - 1)};
            const double v = acquisition(t, context, beta);
            if (v < best_v) {  // strict: ties keep the lowest grid index
                best_v = v;
                best = t;
            }
        }
    }

    // deterministic compass refinement within the box
    double step_c = (c1 - c0) / (g - 1);
    double step_a = (a1 - a0) / (g - 1);
    while (step_c > 1e-4 * (c1 - c0) || step_a > 1e-4 * (a1 - a0)) {
        bool improved = false;
        const ThetaPoint trials[4] = {{best.q_cont + step_c, best.q_adv},
                                      {best.q_cont - step_c, best.q_adv},
                                      {best.q_cont, best.q_adv + step_a},
                                      {best.q_cont, best.q_adv - step_a}};
        for (const auto& t : trials) {
            if (t.q_cont < c0 || t.q_cont > c1 || t.q_adv < a0 || t.q_adv > a1) continue;
            const double v = acquisition(t, context, beta);
            if (v < best_v - 1e-14) {
                best_v = v;
                best = t;
                improved = true;
                break;
            }
        }
        if (!improved) {
            step_c *= 0.5;
            step_a *= 0.5;
        }
    }
    return best;
}

std::vector<TuningRecord> run_tuning(TuningEnv& env, const TuningRunConfig& cfg,
                                     const std::vector<TuningRecord>& pretrain) {
    const bool contextual = cfg.mode == "contextual";
    std::vector<TuningRecord> history;
    if (cfg.iterations <= 0) return history;

    int n_sobol = cfg.bo.sobol_init;
    if (cfg.sobol_override >= 0) n_sobol = cfg.sobol_override;
    if (contextual && !pretrain.empty() && cfg.sobol_override < 0) n_sobol = 0;

    TuningSurrogate surrogate(cfg.domain, cfg.bo, contextual);
    SobolSequence sobol(2);

    if (contextual) env.collect_initial_telemetry();

    double worst_j = 0.0;
    bool any_completed = false;

    for (int n = 1; n <= cfg.iterations; ++n) {
        Eigen::Vector4d context = Eigen::Vector4d::Zero();
        if (contextual) context = env.measure_context_and_update_model();

        ThetaPoint theta;
        if (n <= n_sobol) {
            const auto p = sobol.next();
            theta.q_cont =
                cfg.domain.q_cont_min + (cfg.domain.q_cont_max - cfg.domain.q_cont_min) * p[0];
            theta.q_adv =
                cfg.domain.q_adv_min + (cfg.domain.q_adv_max - cfg.domain.q_adv_min) * p[1];
        } else {
            std::vector<TuningRecord> all = pretrain;
            all.insert(all.end(), history.begin(), history.end());
            surrogate.set_records(all);
            surrogate.fit_hyperparameters(cfg.seed);
            theta = surrogate.suggest(context, cfg.bo.beta);
        }

        const LapEvaluation ev = env.evaluate(theta);

        TuningRecord rec;
        rec.iter = n;
        rec.mode = cfg.mode;
        rec.seed = cfg.seed;
        rec.theta = theta;
        rec.context = context;
        rec.completed = ev.completed;
        if (ev.completed) {
            rec.objective = ev.objective;
            rec.laptime = ev.laptime;
            rec.centerline_dev = ev.centerline_dev;
            any_completed = true;
            worst_j = std::max(worst_j, ev.objective);
        } else {
            // crashed/stalled lap: finite penalty keeps the surrogate well posed
            rec.objective = any_completed ? cfg.bo.penalty_factor * worst_j
                                          : cfg.bo.penalty_fallback;
            rec.laptime = 0.0;
            rec.centerline_dev = 0.0;
        }
        history.push_back(rec);
    }
    return history;
}

void save_records_csv(const std::string& path, const std::vector<TuningRecord>& records) {
    CsvWriter w(path, {"iter", "mode", "seed", "q_cont", "q_adv", "c1", "c2", "c3", "c4", "J",
                       "laptime", "centerline_dev"});
    for (const auto& r : records) {
        w.write_row_strings({std::to_string(r.iter), r.mode, std::to_string(r.seed),
                             format_double(r.theta.q_cont), format_double(r.theta.q_adv),
                             format_double(r.context[0]), format_double(r.context[1]),
                             format_double(r.context[2]), format_double(r.context[3]),
                             format_double(r.objective), format_double(r.laptime),
                             format_double(r.centerline_dev)});
    }
}

}  // namespace racebo
