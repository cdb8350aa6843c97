#include "safecharge/report.hpp"

#include <algorithm>
#include <map>

#include "safecharge/csv.hpp"

namespace safecharge {

RunStats compute_run_stats(const std::vector<EpisodeMetrics>& rows,
                           const std::string& label) {
    RunStats s;
    s.label = label;
    s.rows = static_cast<int>(rows.size());
    if (rows.empty()) return s;

    double sum_return = 0.0, sum_violations = 0.0, sum_ct = 0.0;
    // episode index -> (sum violations, count) across seeds
    std::map<int, std::pair<double, int>> per_episode;
    for (const auto& m : rows) {
        sum_return += m.cumulative_return;
        sum_violations += m.violation_count;
        if (m.charging_time_min >= 0.0) {
            sum_ct += m.charging_time_min;
            ++s.reached_count;
        }
        auto& agg = per_episode[m.episode];
        agg.first += m.violation_count;
        agg.second += 1;
    }
    s.mean_return = sum_return / s.rows;
    s.mean_violations_per_episode = sum_violations / s.rows;
    s.mean_charging_time_min =
        s.reached_count > 0 ? sum_ct / s.reached_count : -1.0;

    std::vector<double> by_episode;
    by_episode.reserve(per_episode.size());
    for (const auto& [ep, agg] : per_episode)
        by_episode.push_back(agg.first / agg.second);
    s.ma_violations = moving_average(by_episode, 10);
    return s;
}

namespace {

void append_kv(std::string& out, const std::string& key, const std::string& v) {
    out += "  ";
    out += key;
    out += ": ";
    out += v;
    out += '\n';
}

}  // namespace

std::string render_comparison(const std::vector<RunStats>& runs) {
    std::string out;
    out += "comparison report\n";
    out += "runs: " + format_int(static_cast<long long>(runs.size())) + "\n\n";

    for (const auto& r : runs) {
        out += "run: " + r.label + "\n";
        append_kv(out, "episodes", format_int(r.rows));
        append_kv(out, "mean_return", format_double(r.mean_return));
        append_kv(out, "mean_violations_per_episode",
                  format_double(r.mean_violations_per_episode));
        append_kv(out, "mean_charging_time_min",
                  r.reached_count > 0 ? format_double(r.mean_charging_time_min)
                                      : std::string("not_reached"));
        append_kv(out, "episodes_reaching_target", format_int(r.reached_count));
        out += '\n';
    }

    if (runs.size() >= 2) {
        const RunStats& base = runs.front();
        out += "deltas vs " + base.label + "\n";
        for (std::size_t i = 1; i < runs.size(); ++i) {
            const RunStats& r = runs[i];
            out += "run: " + r.label + "\n";
            append_kv(out, "mean_return_delta",
                      format_double(r.mean_return - base.mean_return));
            append_kv(out, "mean_violations_per_episode_delta",
                      format_double(r.mean_violations_per_episode -
                                    base.mean_violations_per_episode));
            if (r.reached_count > 0 && base.reached_count > 0)
                append_kv(out, "mean_charging_time_min_delta",
                          format_double(r.mean_charging_time_min -
                                        base.mean_charging_time_min));
            else
                append_kv(out, "mean_charging_time_min_delta", "n/a");
            out += '\n';
        }
    }

    out += "moving_average_violations window=10\n";
    for (const auto& r : runs) {
        out += r.label + ": ";
        for (std::size_t i = 0; i < r.ma_violations.size(); ++i) {
            if (i) out += ',';
            out += format_double(r.ma_violations[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace safecharge
