#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "safecharge/battery.hpp"
#include "safecharge/checkpoint.hpp"

namespace safecharge {

struct TrajectoryRow {
    double t_s = 0.0;        // time at the end of the step
    double current_a = 0.0;  // executed current during the step
    double soc = 0.0;
    double temp_k = 0.0;
    double voltage_v = 0.0;
    double reward = 0.0;
    bool unsafe = false;
};

struct EvalResult {
    std::vector<TrajectoryRow> rows;
    double charging_time_min = -1.0;  // -1 = target not reached
    int violation_count = 0;
    double max_t_violation_k = 0.0;
    double max_v_violation_v = 0.0;
    double peak_temp_k = 0.0;
    double peak_voltage_v = 0.0;
    double final_soc = 0.0;
    int steps = 0;
    bool reached_target = false;  // soc hit charging_time_soc
};

/// Deterministic rollout of the checkpointed policy (noise off, safety layer
/// active when the checkpoint carries one).
EvalResult evaluate_policy(const AgentCheckpoint& checkpoint,
                           const BatteryConfig& config,
                           double charging_time_soc = 0.8);

inline constexpr const char* kTrajectoryHeader =
    "t_s,current_a,soc,temp_k,voltage_v,reward,unsafe";

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryRow>& rows);

/// One-line human summary for the CLI.
std::string eval_summary_line(const EvalResult& r);

}  // namespace safecharge
