#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "safecharge/mlp.hpp"
#include "safecharge/noise.hpp"
#include "safecharge/replay.hpp"

namespace safecharge {

struct AgentConfig {
    double gamma = 0.99;
    std::size_t buffer_capacity = 100000;
    int minibatch = 64;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double safety_lr = 1e-3;
    double tau = 1e-3;
    std::vector<int> actor_hidden = {400, 300};
    std::vector<int> critic_hidden = {400, 300};
    std::vector<int> safety_hidden = {128, 128};
    double ou_theta = 0.15;
    double ou_sigma = 0.2;  // in action-scale units
    double ou_mu = 0.0;
    int warmup_steps = 1000;
    bool noise_decay = true;          // linear decay to 10% over first half
    int safety_pretrain_steps = 0;    // optional random-policy pretraining
    double safety_budget_d = 0.0;

    void validate() const;  // throws std::invalid_argument
};

/// Actor, critic and their targets. The actor maps the 3-dim normalized
/// observation to one current in [action_lo, action_hi] = [-i_max, 0]; the
/// critic takes state and action concatenated at the first layer.
struct DdpgAgent {
    AgentConfig config;
    double action_lo = -1.0;
    double action_hi = 0.0;
    nn::Mlp actor, critic;
    nn::Mlp actor_target, critic_target;
    nn::Optimizer actor_opt, critic_opt;
};

DdpgAgent make_agent(const AgentConfig& config, double i_max_a,
                     std::uint64_t seed);

/// Deterministic clamped policy output.
double policy_action(const DdpgAgent& agent, const Eigen::Vector3d& state);

/// Policy output plus one OU draw (scaled by |action_lo|) when exploring,
/// clamped to the action interval.
double select_action(const DdpgAgent& agent, const Eigen::Vector3d& state,
                     OuNoise& noise, bool explore);

struct UpdateResult {
    double critic_loss = 0.0;
    double actor_objective = 0.0;  // mean Q(s, mu(s)) before the update
    bool applied = false;          // false when a non-finite loss was skipped
};

/// Reusable buffers for update(); one per training thread.
struct UpdateWorkspace {
    Eigen::MatrixXd states, next_states, sa, next_sa, sa_mu;
    Eigen::RowVectorXd actions, rewards, not_done, y, diff;
    nn::ForwardCache critic_cache, actor_cache, critic_mu_cache;
    nn::ForwardCache target_actor_cache, target_critic_cache;
    nn::Gradients critic_grads, actor_grads;
    nn::BackwardWorkspace bw;
    Eigen::MatrixXd dq_input, critic_out_grad, actor_out_grad, neg_mean_grad;
};

/// One critic + actor step on the minibatch followed by soft target updates.
UpdateResult update(DdpgAgent& agent, const ReplayBuffer& buffer,
                    const std::vector<std::size_t>& batch_indices,
                    UpdateWorkspace& ws);

/// Allocating convenience overload.
UpdateResult update(DdpgAgent& agent, const ReplayBuffer& buffer,
                    const std::vector<std::size_t>& batch_indices);

}  // namespace safecharge
