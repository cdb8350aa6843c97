#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "safecharge/battery.hpp"
#include "safecharge/mlp.hpp"

namespace safecharge {

/// Linearized safety constraint g * a + c <= d for one scalar action,
/// intersected with the action box [a_lo, a_hi].
struct SafetyConstraintSet {
    double g = 0.0;
    double c = 0.0;
    double d = 0.0;
    double a_lo = 0.0;
    double a_hi = 0.0;
};

struct SafetySignal {
    double g = 0.0;  // sensitivity of the safety margin to the action
    double c = 0.0;  // margin intercept, so g * a + c is the margin at a
};

struct PerturbResult {
    double action = 0.0;
    bool perturbed = false;    // constraint was active
    bool infeasible = false;   // no in-box action satisfied it; fell back
};

/// Safety network: input (3 normalized state dims + 1 action), ReLU hidden
/// layers, one raw output regressed onto the binary unsafe label of the next
/// state. The decision boundary of that regression sits at 0.5, so the
/// margin used by the constraint is (output - 0.5). Actions are divided by
/// action_scale at the input so the network sees O(1) values; g stays in
/// per-ampere units.
struct SafetyLayer {
    nn::Mlp net;
    nn::Optimizer opt;
    double budget_d = 0.0;
    double action_scale = 1.0;
};

SafetyLayer make_safety_layer(const std::vector<int>& hidden_sizes,
                              double learning_rate, double budget_d,
                              std::uint64_t seed, double action_scale = 1.0);

/// Margin sensitivity g = d(margin)/d(action) and intercept c, both
/// evaluated at (state, action) so that g * a + c equals the linearized
/// margin around the proposed action.
SafetySignal safety_signal(const SafetyLayer& layer,
                           const Eigen::Vector3d& state, double action);

/// Minimizer of 1/2 (a - raw)^2 subject to g a + c <= d and the box. When
/// the constraint cannot be met inside the box, falls back to the most
/// conservative in-box action (no charging) and flags the event.
PerturbResult perturb_action(double raw_action, const SafetyConstraintSet& cs);

/// Binary label of a state per the safety thresholds: 1 when unsafe.
int safety_target(const BatteryConfig& config, double temp_k, double voltage_v);

struct SafetyUpdateResult {
    double loss = 0.0;
    bool applied = false;
};

/// Reusable buffers for update_safety(); one per training thread.
struct SafetyUpdateWorkspace {
    Eigen::MatrixXd input;
    nn::ForwardCache cache;
    Eigen::RowVectorXd diff;
    Eigen::MatrixXd out_grad;
    nn::Gradients grads;
    nn::BackwardWorkspace bw;
};

/// One gradient step of the squared-error loss between the network output at
/// (state_i, action_i) and the binary target k_i. States are columns.
SafetyUpdateResult update_safety(SafetyLayer& layer,
                                 const Eigen::MatrixXd& states,
                                 const Eigen::VectorXd& actions,
                                 const Eigen::VectorXd& targets,
                                 SafetyUpdateWorkspace& ws);

/// Allocating convenience overload.
SafetyUpdateResult update_safety(SafetyLayer& layer,
                                 const Eigen::MatrixXd& states,
                                 const Eigen::VectorXd& actions,
                                 const Eigen::VectorXd& targets);

/// Raw network output in [~0, ~1]; >= 0.5 classifies the pair as unsafe.
double safety_prediction(const SafetyLayer& layer, const Eigen::Vector3d& state,
                         double action);

}  // namespace safecharge
