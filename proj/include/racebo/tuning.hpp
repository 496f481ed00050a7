#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "racebo/config.hpp"
#include "racebo/gp.hpp"

namespace racebo {

struct ThetaPoint {
    double q_cont = 0.0;
    double q_adv = 0.0;
};

// One tuning datum (theta, context, objective) plus reporting extras.
struct TuningRecord {
    int iter = 0;                 // 1-based within its run
    std::string mode;             // standard | contextual
    uint64_t seed = 0;
    ThetaPoint theta;
    Eigen::Vector4d context = Eigen::Vector4d::Zero();
    double objective = 0.0;       // J, penalty-substituted on failure
    double laptime = 0.0;
    double centerline_dev = 0.0;  // [cm]
    bool completed = true;
};

// Surrogate over (theta, context): squared-exponential product kernel with
// theta normalized to the unit box and contexts standardized by the mean/std
// of the observed records. In standard mode the context block is dropped
// (k_c == 1).
class TuningSurrogate {
public:
    TuningSurrogate(const TuningDomain& domain, const BoConfig& bo, bool contextual);

    void set_records(const std::vector<TuningRecord>& records);
    void fit_hyperparameters(uint64_t seed);

    void posterior(const ThetaPoint& theta, const Eigen::Vector4d& context, double& mean,
                   double& var) const;

    // lower confidence bound mu - beta * sigma (minimization form)
    double acquisition(const ThetaPoint& theta, const Eigen::Vector4d& context,
                       double beta) const;

    // argmin of the acquisition over a grid_n x grid_n grid refined by a
    // deterministic compass search; ties break to the lowest grid index. With
    // no data the domain center is returned.
    ThetaPoint suggest(const Eigen::Vector4d& context, double beta) const;

    int size() const { return gp_.size(); }
    const GpRegressor& gp() const { return gp_; }
    GpRegressor& gp() { return gp_; }
    Eigen::VectorXd encode(const ThetaPoint& theta, const Eigen::Vector4d& context) const;

private:
    TuningDomain domain_;
    BoConfig bo_;
    bool contextual_;
    Eigen::Vector4d ctx_mean_ = Eigen::Vector4d::Zero();
    Eigen::Vector4d ctx_scale_ = Eigen::Vector4d::Ones();
    GpRegressor gp_;
};

struct LapEvaluation {
    double objective = 0.0;       // J of the measured lap (valid when completed)
    double laptime = 0.0;
    double centerline_dev = 0.0;  // [cm]
    bool completed = false;
};

// What a tuning loop needs from the plant side. The simulation harness
// implements it; tests may substitute synthetic objectives.
class TuningEnv {
public:
    virtual ~TuningEnv() = default;

    // apply theta, drive one transient lap and one measured lap
    virtual LapEvaluation evaluate(const ThetaPoint& theta) = 0;

    // drive one lap at default weights to seed the telemetry (contextual only)
    virtual void collect_initial_telemetry() = 0;

    // context of the latest telemetry; also swaps the fitted residual into the
    // prediction model (contextual only)
    virtual Eigen::Vector4d measure_context_and_update_model() = 0;
};

struct TuningRunConfig {
    std::string mode = "standard";  // standard | contextual
    int iterations = 15;
    uint64_t seed = 0;
    TuningDomain domain;
    BoConfig bo;
    int sobol_override = -1;  // >= 0 forces the initialization budget
};

// The contextual tuning loop: Sobol initialization, per-iteration context
// measurement, acquisition suggestion, evaluation, data append. In standard
// mode the context steps are skipped and the surrogate is context-free.
std::vector<TuningRecord> run_tuning(TuningEnv& env, const TuningRunConfig& cfg,
                                     const std::vector<TuningRecord>& pretrain);

void save_records_csv(const std::string& path, const std::vector<TuningRecord>& records);

}  // namespace racebo
