#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "racebo/sim.hpp"

namespace racebo {

// ---- prediction-error comparison (no learning vs GP vs feature BLR) --------

struct ModelLearningResult {
    // rmse[model][state] -> {mean, std}; models: none, gp, blr;
    // states: vy [cm/s], omega [rad/s]
    std::map<std::string, std::map<std::string, std::pair<double, double>>> rmse;
    int resamples = 0;
};

ModelLearningResult experiment_model_learning(const Config& cfg, const Track& track,
                                              uint64_t seed, const std::string& out_dir);

// ---- three fixed settings: detuned nominal / learned / learned+tuned -------

struct SettingStats {
    std::string name;
    std::vector<double> laptimes;
    std::vector<double> devs_cm;
    int aborted = 0;
    int boundary_violations = 0;
    double mean_laptime = 0.0;
    double mean_dev_cm = 0.0;
};

struct ThreeSettingsResult {
    std::array<SettingStats, 3> settings;
};

ThreeSettingsResult experiment_three_settings(const Config& cfg, const Track& track,
                                              uint64_t seed, const std::string& out_dir);

// ---- response surface of the regularized objective over the weights --------

struct SurfaceResult {
    std::vector<TuningRecord> records;
    ThetaPoint argmin;
    double argmin_value = 0.0;
};

SurfaceResult experiment_response_surface(const Config& cfg, const Track& track,
                                          const std::string& scenario, uint64_t seed,
                                          int n_sobol, int n_ucb, const std::string& out_dir);

// ---- per-lap context distributions across scenarios -------------------------

struct ClusterResult {
    std::vector<std::string> scenarios;
    std::vector<std::vector<Eigen::Vector4d>> contexts;  // per scenario, per lap
    double min_centroid_distance = 0.0;
    double max_within_std = 0.0;  // RMS radius, max over scenarios
};

ClusterResult experiment_context_clusters(const Config& cfg, const Track& track, int laps,
                                          uint64_t seed, const std::string& out_dir);

// ---- contextual vs standard tuning across scenarios -------------------------

struct TransferRun {
    std::string scenario;
    std::string mode;
    uint64_t seed = 0;
    std::vector<TuningRecord> records;
};

struct TransferResult {
    std::vector<TransferRun> runs;

    std::vector<double> best_so_far(const std::string& scenario, const std::string& mode,
                                    uint64_t seed) const;
};

// Scenarios are processed in order; each gets standard-mode runs from scratch
// and contextual runs pretrained on the records accumulated from the previous
// scenarios' first contextual run.
TransferResult experiment_transfer(const Config& cfg, const Track& track,
                                   const std::vector<std::string>& order, int iterations,
                                   int n_seeds, uint64_t seed, const std::string& out_dir);

// run manifest (plain key=value); captures config/track hashes and the seed
void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const Config& cfg, const std::string& track_path, uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& extra);

}  // namespace racebo
