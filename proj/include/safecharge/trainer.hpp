#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safecharge/battery.hpp"
#include "safecharge/config_io.hpp"
#include "safecharge/ddpg.hpp"
#include "safecharge/safety.hpp"

namespace safecharge {

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainRun {
    RunConfig run;
    std::filesystem::path output_dir;
    int max_parallel_seeds = 0;  // 0 = hardware concurrency
};

struct EpisodeMetrics {
    int episode = 0;  // 0-based
    std::uint64_t seed = 0;
    int config_id = 0;
    double cumulative_return = 0.0;
    double max_t_violation_k = 0.0;
    double max_v_violation_v = 0.0;
    int violation_count = 0;
    double charging_time_min = -1.0;  // -1 = target not reached
    int steps = 0;
};

/// Fired once per environment step; with several seed workers the hook runs
/// concurrently and must be thread-safe.
struct StepEvent {
    std::uint64_t seed = 0;
    int episode = 0;
    int step = 0;  // 1-based within the episode
    int config_id = 0;
    Eigen::Vector3d observation;
    double raw_action = 0.0;
    double safe_action = 0.0;
    double buffered_action = 0.0;  // what was stored in the replay buffer
    double reward = 0.0;
    double t_violation = 0.0;
    double v_violation = 0.0;
    bool unsafe = false;
    bool done = false;
    bool perturbed = false;
    bool infeasible = false;
    double g = 0.0;
    double c = 0.0;
};

using StepHook = std::function<void(const StepEvent&)>;

/// Runs the full training loop for every seed, writes metrics.csv,
/// run_info.json, per-seed perturbation event logs and checkpoints under
/// output_dir, and returns all episode metrics in (seed, episode) order.
std::vector<EpisodeMetrics> run_training(const TrainRun& train,
                                         const StepHook& hook = {});

/// Trailing moving average; element i averages the last min(i+1, window)
/// values. Empty input gives empty output.
std::vector<double> moving_average(const std::vector<double>& series,
                                   int window = 10);

/// Minutes until soc first reaches the target along a trajectory sampled at
/// dt_s (element i corresponds to time i * dt_s). Returns nullopt when the
/// target is never reached.
std::optional<double> charging_time_min(const std::vector<double>& soc_series,
                                        double soc_target, double dt_s);

inline constexpr const char* kMetricsHeader =
    "episode,seed,config_id,return,max_t_violation_k,max_v_violation_v,"
    "violation_count,charging_time_min,steps";

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpisodeMetrics>& rows);

/// Throws ConfigError when the header does not match kMetricsHeader.
std::vector<EpisodeMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace safecharge
