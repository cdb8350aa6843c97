#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safecharge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One (state of charge, open-circuit voltage) knot of the OCV curve.
struct OcvKnot {
    double soc;
    double voltage_v;
};

/// Physical and safety parameters of one cell configuration.
/// Charging current is negative by sign convention; soc is a fraction.
struct BatteryConfig {
    double capacity_ah = 1.5;
    double mass_kg = 0.045;
    double specific_heat = 1000.0;            // J/(kg K)
    double thermal_resistance = 5.0;          // K/W
    double ambient_temp_k = 298.15;
    double internal_resistance_ohm = 0.05;
    double entropy_coeff_v_per_k = -1e-4;     // d(OCV)/dT
    std::vector<OcvKnot> ocv_table = {
        {0.0, 2.2}, {0.1, 3.0}, {0.5, 3.6}, {0.8, 3.9}, {1.0, 4.25}};
    double v_min = 2.2;
    double v_max = 4.5;
    double v_safe = 4.2;
    double t_safe_k = 308.15;                 // 35 degC
    double i_max_a = 4.2;
    double initial_voltage_v = 2.5;
    double initial_temp_k = 298.15;
    double dt_s = 10.0;
    double soc_target = 0.9;                  // episode-terminating soc
    int max_steps = 180;
    std::string id = "default";
};

struct BatteryState {
    double soc = 0.0;
    double temp_k = 0.0;
    double voltage_v = 0.0;
    int step_count = 0;
    double time_s = 0.0;   // always step_count * dt_s
};

struct StepOutcome {
    Eigen::Vector3d next_observation;  // normalized (temp, voltage, soc)
    double reward = 0.0;
    bool done = false;
    double t_violation = 0.0;          // kelvin above t_safe_k, >= 0
    double v_violation = 0.0;          // volts above v_safe, >= 0
    bool unsafe = false;               // next state beyond a safety threshold
};

/// Throws ConfigError naming the offending field when an invariant fails.
void validate(const BatteryConfig& config);

/// Piecewise-linear open-circuit voltage; soc is clamped to [0, 1].
double ocv(const BatteryConfig& config, double soc);

/// Inverse of ocv(). Throws ConfigError if voltage is outside the table range.
double inverse_ocv(const BatteryConfig& config, double voltage_v);

/// Initial state: configured temperature/voltage, soc from the OCV table.
BatteryState reset(const BatteryConfig& config);

/// Heat generation rate in watts for the given applied current. The ohmic
/// voltage model reduces the overpotential term to I^2 R; the entropic term
/// is -I T d(OCV)/dT.
double heat_generation(const BatteryConfig& config, const BatteryState& state,
                       double current_a);

/// Fixed observation normalization: ((T - 273.15)/50, V/5, soc).
Eigen::Vector3d observe(const BatteryConfig& config, const BatteryState& state);

/// Threshold indicator of an unsafe state: T >= t_safe_k or V >= v_safe.
bool unsafe_state(const BatteryConfig& config, double temp_k, double voltage_v);

/// Canonical step reward: -100*v_violation - 5*t_violation - 0.1.
/// Defined once (out of line) so logged rewards can be re-derived bit-exactly.
double step_reward(double v_violation, double t_violation);

/// One explicit-Euler step under the applied current (amperes, in
/// [-i_max_a, 0]). Throws std::invalid_argument if the current is out of
/// bounds; callers clamp first.
std::pair<BatteryState, StepOutcome> step(const BatteryConfig& config,
                                          const BatteryState& state,
                                          double current_a);

}  // namespace safecharge
