#include <doctest.h>

#include "safecharge/report.hpp"

using namespace safecharge;

namespace {

EpisodeMetrics row(int episode, std::uint64_t seed, double ret, int violations,
                   double charging) {
    EpisodeMetrics m;
    m.episode = episode;
    m.seed = seed;
    m.cumulative_return = ret;
    m.violation_count = violations;
    m.charging_time_min = charging;
    m.steps = 100;
    return m;
}

}  // namespace

TEST_CASE("run stats aggregate across seeds") {
    std::vector<EpisodeMetrics> rows = {
        row(0, 1, -10.0, 2, 17.0), row(1, 1, -20.0, 4, -1.0),
        row(0, 2, -30.0, 0, 18.0), row(1, 2, -40.0, 2, 16.0)};
    RunStats s = compute_run_stats(rows, "test");
    CHECK(s.rows == 4);
    CHECK(s.mean_return == doctest::Approx(-25.0));
    CHECK(s.mean_violations_per_episode == doctest::Approx(2.0));
    CHECK(s.reached_count == 3);
    CHECK(s.mean_charging_time_min == doctest::Approx(17.0));
    // per-episode means: ep0 -> 1, ep1 -> 3; window-10 trailing average
    REQUIRE(s.ma_violations.size() == 2);
    CHECK(s.ma_violations[0] == doctest::Approx(1.0));
    CHECK(s.ma_violations[1] == doctest::Approx(2.0));
}

TEST_CASE("identical runs compare with zero deltas") {
    std::vector<EpisodeMetrics> rows = {row(0, 1, -5.0, 1, 15.0),
                                        row(1, 1, -7.0, 0, 14.0)};
    RunStats a = compute_run_stats(rows, "a");
    RunStats b = compute_run_stats(rows, "b");
    std::string report = render_comparison({a, b});
    CHECK(report.find("mean_return_delta: 0\n") != std::string::npos);
    CHECK(report.find("mean_violations_per_episode_delta: 0\n") !=
          std::string::npos);
    CHECK(report.find("mean_charging_time_min_delta: 0\n") !=
          std::string::npos);
    CHECK(report.find("moving_average_violations window=10") !=
          std::string::npos);
}

TEST_CASE("single-row runs report their own values as means") {
    std::vector<EpisodeMetrics> rows = {row(0, 1, -3.5, 7, 12.25)};
    RunStats s = compute_run_stats(rows, "single");
    CHECK(s.mean_return == -3.5);
    CHECK(s.mean_violations_per_episode == 7.0);
    CHECK(s.mean_charging_time_min == 12.25);
    REQUIRE(s.ma_violations.size() == 1);
    CHECK(s.ma_violations[0] == 7.0);
}

TEST_CASE("empty runs render without crashing") {
    RunStats s = compute_run_stats({}, "empty");
    CHECK(s.rows == 0);
    std::string report = render_comparison({s});
    CHECK(report.find("run: empty") != std::string::npos);
}
