#include "safecharge/battery.hpp"

#include <algorithm>
#include <cmath>

namespace safecharge {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void validate(const BatteryConfig& c) {
    require(c.capacity_ah > 0.0, "capacity_ah must be > 0");
    require(c.mass_kg > 0.0, "mass_kg must be > 0");
    require(c.specific_heat > 0.0, "specific_heat must be > 0");
    require(c.thermal_resistance > 0.0, "thermal_resistance must be > 0");
    require(c.dt_s > 0.0, "dt_s must be > 0");
    require(c.i_max_a > 0.0, "i_max_a must be > 0");
    require(c.max_steps > 0, "max_steps must be > 0");
    require(c.soc_target > 0.0 && c.soc_target <= 1.0,
            "soc_target must be in (0, 1]");
    require(c.internal_resistance_ohm >= 0.0,
            "internal_resistance_ohm must be >= 0");

    require(c.ocv_table.size() >= 2, "ocv_table needs at least two knots");
    require(c.ocv_table.front().soc == 0.0, "ocv_table must start at soc 0");
    require(c.ocv_table.back().soc == 1.0, "ocv_table must end at soc 1");
    for (std::size_t i = 1; i < c.ocv_table.size(); ++i) {
        require(c.ocv_table[i].soc > c.ocv_table[i - 1].soc,
                "ocv_table soc values must be strictly increasing");
        require(c.ocv_table[i].voltage_v > c.ocv_table[i - 1].voltage_v,
                "ocv_table voltages must be strictly increasing");
    }

    require(c.v_min <= c.initial_voltage_v,
            "initial_voltage_v must be >= v_min");
    require(c.initial_voltage_v <= c.v_safe,
            "initial_voltage_v must be <= v_safe");
    require(c.v_safe <= c.v_max, "v_safe must be <= v_max");
    require(c.initial_voltage_v >= c.ocv_table.front().voltage_v &&
                c.initial_voltage_v <= c.ocv_table.back().voltage_v,
            "initial_voltage_v outside the OCV table voltage range");

    for (double v : {c.ambient_temp_k, c.initial_temp_k, c.t_safe_k})
        require(v > 0.0, "temperatures must be in kelvin (> 0)");
}

double ocv(const BatteryConfig& c, double soc) {
    const auto& t = c.ocv_table;
    if (soc <= t.front().soc) return t.front().voltage_v;
    if (soc >= t.back().soc) return t.back().voltage_v;
    auto hi = std::upper_bound(
        t.begin(), t.end(), soc,
        [](double s, const OcvKnot& k) { return s < k.soc; });
    auto lo = hi - 1;
    double f = (soc - lo->soc) / (hi->soc - lo->soc);
    return lo->voltage_v + f * (hi->voltage_v - lo->voltage_v);
}

double inverse_ocv(const BatteryConfig& c, double voltage_v) {
    const auto& t = c.ocv_table;
    if (voltage_v < t.front().voltage_v || voltage_v > t.back().voltage_v)
        throw ConfigError("voltage outside the OCV table range");
    if (voltage_v == t.front().voltage_v) return t.front().soc;
    auto hi = std::upper_bound(
        t.begin(), t.end(), voltage_v,
        [](double v, const OcvKnot& k) { return v < k.voltage_v; });
    if (hi == t.end()) return t.back().soc;
    auto lo = hi - 1;
    double f = (voltage_v - lo->voltage_v) / (hi->voltage_v - lo->voltage_v);
    return lo->soc + f * (hi->soc - lo->soc);
}

BatteryState reset(const BatteryConfig& c) {
    BatteryState s;
    s.temp_k = c.initial_temp_k;
    s.voltage_v = c.initial_voltage_v;
    s.soc = inverse_ocv(c, c.initial_voltage_v);
    s.step_count = 0;
    s.time_s = 0.0;
    return s;
}

double heat_generation(const BatteryConfig& c, const BatteryState& s,
                       double current_a) {
    // I (OCV - V) with V = OCV - I R collapses to I^2 R.
    double joule = current_a * current_a * c.internal_resistance_ohm;
    double entropic = -current_a * s.temp_k * c.entropy_coeff_v_per_k;
    return joule + entropic;
}

Eigen::Vector3d observe(const BatteryConfig&, const BatteryState& s) {
    return {(s.temp_k - 273.15) / 50.0, s.voltage_v / 5.0, s.soc};
}

bool unsafe_state(const BatteryConfig& c, double temp_k, double voltage_v) {
    return temp_k >= c.t_safe_k || voltage_v >= c.v_safe;
}

double step_reward(double v_violation, double t_violation) {
    return -100.0 * v_violation - 5.0 * t_violation - 0.1;
}

std::pair<BatteryState, StepOutcome> step(const BatteryConfig& c,
                                          const BatteryState& s,
                                          double current_a) {
    if (current_a < -c.i_max_a || current_a > 0.0)
        throw std::invalid_argument("current out of [-i_max_a, 0]");

    BatteryState n;
    // Coulomb counting; negative (charging) current raises soc.
    n.soc = std::clamp(
        s.soc - current_a * c.dt_s / (3600.0 * c.capacity_ah), 0.0, 1.0);

    double q_dot = heat_generation(c, s, current_a);
    n.temp_k = s.temp_k +
               c.dt_s / (c.mass_kg * c.specific_heat) *
                   ((c.ambient_temp_k - s.temp_k) / c.thermal_resistance + q_dot);

    n.voltage_v = ocv(c, n.soc) - current_a * c.internal_resistance_ohm;
    n.step_count = s.step_count + 1;
    n.time_s = n.step_count * c.dt_s;

    StepOutcome out;
    out.t_violation = std::max(0.0, n.temp_k - c.t_safe_k);
    out.v_violation = std::max(0.0, n.voltage_v - c.v_safe);
    out.reward = step_reward(out.v_violation, out.t_violation);
    out.unsafe = unsafe_state(c, n.temp_k, n.voltage_v);
    out.done = n.soc >= c.soc_target || n.step_count >= c.max_steps;
    out.next_observation = observe(c, n);
    return {n, out};
}

}  // namespace safecharge
