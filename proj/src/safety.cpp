#include "safecharge/safety.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safecharge {

namespace {
// The network regresses onto labels in {0, 1}; outputs above this value
// classify as unsafe, so the constraint margin is (output - boundary).
constexpr double kDecisionBoundary = 0.5;
}  // namespace

SafetyLayer make_safety_layer(const std::vector<int>& hidden_sizes,
                              double learning_rate, double budget_d,
                              std::uint64_t seed, double action_scale) {
    std::vector<int> sizes;
    sizes.push_back(4);  // 3 state dims + action
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(1);
    SafetyLayer layer;
    layer.net = nn::make_mlp(sizes, nn::OutputActivation::identity, seed);
    layer.opt = nn::make_optimizer(nn::OptimizerMode::adam, learning_rate,
                                   layer.net);
    layer.budget_d = budget_d;
    if (action_scale <= 0.0)
        throw std::invalid_argument("action_scale must be > 0");
    layer.action_scale = action_scale;
    return layer;
}

namespace {

Eigen::Vector4d joined(const Eigen::Vector3d& state, double action) {
    Eigen::Vector4d x;
    x << state(0), state(1), state(2), action;
    return x;
}

}  // namespace

SafetySignal safety_signal(const SafetyLayer& layer,
                           const Eigen::Vector3d& state, double action) {
    nn::ForwardCache cache;
    Eigen::MatrixXd out = nn::forward(
        layer.net, joined(state, action / layer.action_scale), &cache);
    double u = out(0, 0);
    Eigen::MatrixXd input_grad;
    nn::backward(layer.net, cache, Eigen::MatrixXd::Ones(1, 1), &input_grad,
                 /*param_grads=*/false);
    SafetySignal sig;
    sig.g = input_grad(3, 0) / layer.action_scale;
    sig.c = (u - kDecisionBoundary) - sig.g * action;
    return sig;
}

double safety_prediction(const SafetyLayer& layer, const Eigen::Vector3d& state,
                         double action) {
    return nn::forward(
        layer.net,
        Eigen::VectorXd(joined(state, action / layer.action_scale)))(0);
}

PerturbResult perturb_action(double raw_action, const SafetyConstraintSet& cs) {
    PerturbResult res;
    const double fallback = std::clamp(0.0, cs.a_lo, cs.a_hi);
    if (cs.g * raw_action + cs.c <= cs.d) {
        res.action = raw_action;  // constraint inactive: bit-exact no-op
        return res;
    }
    res.perturbed = true;
    if (cs.g == 0.0) {
        // Constraint violated independently of the action.
        res.action = fallback;
        res.infeasible = true;
        return res;
    }
    double boundary = (cs.d - cs.c) / cs.g;
    if (cs.g > 0.0) {
        // Feasible half-line a <= boundary.
        if (boundary < cs.a_lo) {
            res.action = fallback;
            res.infeasible = true;
        } else {
            res.action = std::min(boundary, cs.a_hi);
        }
    } else {
        // Feasible half-line a >= boundary.
        if (boundary > cs.a_hi) {
            res.action = fallback;
            res.infeasible = true;
        } else {
            res.action = std::max(boundary, cs.a_lo);
        }
    }
    return res;
}

int safety_target(const BatteryConfig& config, double temp_k,
                  double voltage_v) {
    return unsafe_state(config, temp_k, voltage_v) ? 1 : 0;
}

SafetyUpdateResult update_safety(SafetyLayer& layer,
                                 const Eigen::MatrixXd& states,
                                 const Eigen::VectorXd& actions,
                                 const Eigen::VectorXd& targets,
                                 SafetyUpdateWorkspace& ws) {
    const Eigen::Index n = states.cols();
    if (n == 0) throw std::invalid_argument("update_safety: empty batch");
    if (actions.size() != n || targets.size() != n)
        throw std::invalid_argument("update_safety: batch size mismatch");

    ws.input.resize(4, n);
    ws.input.topRows(3) = states;
    ws.input.row(3) = actions.transpose() / layer.action_scale;

    nn::forward_into(layer.net, ws.input, ws.cache);
    ws.diff = ws.cache.post.back().row(0) - targets.transpose();
    SafetyUpdateResult res;
    res.loss = ws.diff.squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(res.loss)) return res;  // step skipped

    ws.out_grad = (2.0 / static_cast<double>(n)) * ws.diff;
    nn::backward_into(layer.net, ws.cache, ws.out_grad, &ws.grads, nullptr,
                      ws.bw);
    res.applied = nn::apply_gradients(layer.net, ws.grads, layer.opt);
    return res;
}

SafetyUpdateResult update_safety(SafetyLayer& layer,
                                 const Eigen::MatrixXd& states,
                                 const Eigen::VectorXd& actions,
                                 const Eigen::VectorXd& targets) {
    SafetyUpdateWorkspace ws;
    return update_safety(layer, states, actions, targets, ws);
}

}  // namespace safecharge
