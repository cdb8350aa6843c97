#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "safecharge/trainer.hpp"

namespace safecharge {

struct RunStats {
    std::string label;
    int rows = 0;
    double mean_return = 0.0;
    double mean_violations_per_episode = 0.0;
    double mean_charging_time_min = 0.0;  // over episodes that reached target
    int reached_count = 0;
    std::vector<double> ma_violations;  // window-10 moving average by episode
};

RunStats compute_run_stats(const std::vector<EpisodeMetrics>& rows,
                           const std::string& label);

/// Comparison report over >= 2 metrics files: per-run means, deltas against
/// the first run, and the moving-average violation series for plotting.
std::string render_comparison(const std::vector<RunStats>& runs);

}  // namespace safecharge
