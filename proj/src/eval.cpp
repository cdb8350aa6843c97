#include "safecharge/eval.hpp"

#include <algorithm>

#include "safecharge/csv.hpp"
#include "safecharge/ddpg.hpp"
#include "safecharge/safety.hpp"
#include "safecharge/trainer.hpp"

namespace safecharge {

EvalResult evaluate_policy(const AgentCheckpoint& checkpoint,
                           const BatteryConfig& config,
                           double charging_time_soc) {
    validate(config);
    EvalResult res;
    BatteryState state = reset(config);
    res.peak_temp_k = state.temp_k;
    res.peak_voltage_v = state.voltage_v;

    std::vector<double> socs;
    socs.reserve(static_cast<std::size_t>(config.max_steps) + 1);
    socs.push_back(state.soc);

    const double lo = -config.i_max_a;
    const double hi = 0.0;
    for (int i = 1; i <= config.max_steps; ++i) {
        Eigen::Vector3d obs = observe(config, state);
        double a = std::clamp(
            nn::forward(checkpoint.agent.actor, Eigen::VectorXd(obs))(0), lo, hi);
        if (checkpoint.safety_enabled) {
            SafetySignal sig = safety_signal(checkpoint.safety, obs, a);
            a = perturb_action(a, {sig.g, sig.c, checkpoint.safety.budget_d,
                                   lo, hi})
                    .action;
        }
        auto [next_state, out] = step(config, state, a);

        TrajectoryRow row;
        row.t_s = next_state.time_s;
        row.current_a = a;
        row.soc = next_state.soc;
        row.temp_k = next_state.temp_k;
        row.voltage_v = next_state.voltage_v;
        row.reward = out.reward;
        row.unsafe = out.unsafe;
        res.rows.push_back(row);

        if (out.unsafe) ++res.violation_count;
        res.max_t_violation_k = std::max(res.max_t_violation_k, out.t_violation);
        res.max_v_violation_v = std::max(res.max_v_violation_v, out.v_violation);
        res.peak_temp_k = std::max(res.peak_temp_k, next_state.temp_k);
        res.peak_voltage_v = std::max(res.peak_voltage_v, next_state.voltage_v);

        state = next_state;
        socs.push_back(state.soc);
        res.steps = i;
        if (out.done) break;
    }

    res.final_soc = state.soc;
    auto ct = charging_time_min(socs, charging_time_soc, config.dt_s);
    res.reached_target = ct.has_value();
    res.charging_time_min = ct ? *ct : -1.0;
    return res;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryRow>& rows) {
    std::string out;
    out += kTrajectoryHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += format_double(r.t_s);
        out += ',';
        out += format_double(r.current_a);
        out += ',';
        out += format_double(r.soc);
        out += ',';
        out += format_double(r.temp_k);
        out += ',';
        out += format_double(r.voltage_v);
        out += ',';
        out += format_double(r.reward);
        out += ',';
        out += r.unsafe ? '1' : '0';
        out += '\n';
    }
    write_file(path, out);
}

std::string eval_summary_line(const EvalResult& r) {
    std::string s = "charging_time_min=";
    s += r.reached_target ? format_double(r.charging_time_min)
                          : std::string("not_reached");
    s += " violation_count=" + format_int(r.violation_count);
    s += " peak_temp_k=" + format_double(r.peak_temp_k);
    s += " peak_voltage_v=" + format_double(r.peak_voltage_v);
    s += " final_soc=" + format_double(r.final_soc);
    s += " steps=" + format_int(r.steps);
    return s;
}

}  // namespace safecharge
