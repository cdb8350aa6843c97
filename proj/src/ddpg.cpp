#include "safecharge/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "safecharge/rng.hpp"

namespace safecharge {

void AgentConfig::validate() const {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("gamma must be in [0, 1]");
    if (tau <= 0.0 || tau > 1.0)
        throw std::invalid_argument("tau must be in (0, 1]");
    if (minibatch <= 0) throw std::invalid_argument("minibatch must be > 0");
    if (static_cast<std::size_t>(minibatch) > buffer_capacity)
        throw std::invalid_argument("minibatch must be <= buffer_capacity");
    if (actor_lr <= 0.0 || critic_lr <= 0.0 || safety_lr <= 0.0)
        throw std::invalid_argument("learning rates must be > 0");
    if (warmup_steps < minibatch)
        throw std::invalid_argument("warmup_steps must be >= minibatch");
    if (actor_hidden.empty() || critic_hidden.empty() || safety_hidden.empty())
        throw std::invalid_argument("hidden layer lists must be nonempty");
}

namespace {

constexpr double kActorFinalScale = 3e-3;

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes;
    sizes.push_back(in);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

}  // namespace

DdpgAgent make_agent(const AgentConfig& config, double i_max_a,
                     std::uint64_t seed) {
    config.validate();
    if (i_max_a <= 0.0) throw std::invalid_argument("i_max_a must be > 0");
    DdpgAgent agent;
    agent.config = config;
    agent.action_lo = -i_max_a;
    agent.action_hi = 0.0;

    std::mt19937_64 seeder = make_engine(seed, RngStream::weight_init);
    auto next_seed = [&seeder]() { return seeder(); };

    agent.actor = nn::make_mlp(with_ends(3, config.actor_hidden, 1),
                               nn::OutputActivation::scaled_tanh, next_seed(),
                               kActorFinalScale, agent.action_lo,
                               agent.action_hi);
    agent.critic = nn::make_mlp(with_ends(4, config.critic_hidden, 1),
                                nn::OutputActivation::identity, next_seed(),
                                kActorFinalScale);
    agent.actor_target = agent.actor;
    agent.critic_target = agent.critic;
    agent.actor_opt =
        nn::make_optimizer(nn::OptimizerMode::adam, config.actor_lr, agent.actor);
    agent.critic_opt = nn::make_optimizer(nn::OptimizerMode::adam,
                                          config.critic_lr, agent.critic);
    return agent;
}

double policy_action(const DdpgAgent& agent, const Eigen::Vector3d& state) {
    double a = nn::forward(agent.actor, Eigen::VectorXd(state))(0);
    return std::clamp(a, agent.action_lo, agent.action_hi);
}

double select_action(const DdpgAgent& agent, const Eigen::Vector3d& state,
                     OuNoise& noise, bool explore) {
    double a = nn::forward(agent.actor, Eigen::VectorXd(state))(0);
    if (explore) a += -agent.action_lo * noise.sample();
    return std::clamp(a, agent.action_lo, agent.action_hi);
}

UpdateResult update(DdpgAgent& agent, const ReplayBuffer& buffer,
                    const std::vector<std::size_t>& batch_indices,
                    UpdateWorkspace& ws) {
    const Eigen::Index n = static_cast<Eigen::Index>(batch_indices.size());
    if (n == 0) throw std::invalid_argument("update: empty batch");

    ws.states.resize(3, n);
    ws.next_states.resize(3, n);
    ws.actions.resize(n);
    ws.rewards.resize(n);
    ws.not_done.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Transition& t = buffer[batch_indices[static_cast<std::size_t>(i)]];
        ws.states.col(i) = t.state;
        ws.next_states.col(i) = t.next_state;
        ws.actions(i) = t.action;
        ws.rewards(i) = t.reward;
        ws.not_done(i) = t.done ? 0.0 : 1.0;
    }

    UpdateResult res;
    const double inv_n = 1.0 / static_cast<double>(n);

    // Critic targets y = r + gamma (1 - done) Q'(s', mu'(s')).
    nn::forward_into(agent.actor_target, ws.next_states, ws.target_actor_cache);
    ws.next_sa.resize(4, n);
    ws.next_sa.topRows(3) = ws.next_states;
    ws.next_sa.row(3) = ws.target_actor_cache.post.back().row(0);
    nn::forward_into(agent.critic_target, ws.next_sa, ws.target_critic_cache);
    ws.y = ws.rewards +
           agent.config.gamma *
               ws.not_done.cwiseProduct(ws.target_critic_cache.post.back().row(0));

    ws.sa.resize(4, n);
    ws.sa.topRows(3) = ws.states;
    ws.sa.row(3) = ws.actions;
    nn::forward_into(agent.critic, ws.sa, ws.critic_cache);
    ws.diff = ws.critic_cache.post.back().row(0) - ws.y;
    res.critic_loss = ws.diff.squaredNorm() * inv_n;
    if (!std::isfinite(res.critic_loss)) return res;  // skip, leave nets alone

    ws.critic_out_grad = (2.0 * inv_n) * ws.diff;
    nn::backward_into(agent.critic, ws.critic_cache, ws.critic_out_grad,
                      &ws.critic_grads, nullptr, ws.bw);
    if (!nn::apply_gradients(agent.critic, ws.critic_grads, agent.critic_opt))
        return res;

    // Actor objective J = mean Q(s, mu(s)); ascend via d(-J)/dtheta, with
    // dQ/da taken through the freshly updated critic.
    nn::forward_into(agent.actor, ws.states, ws.actor_cache);
    ws.sa_mu.resize(4, n);
    ws.sa_mu.topRows(3) = ws.states;
    ws.sa_mu.row(3) = ws.actor_cache.post.back().row(0);
    nn::forward_into(agent.critic, ws.sa_mu, ws.critic_mu_cache);
    res.actor_objective = ws.critic_mu_cache.post.back().row(0).mean();
    if (!std::isfinite(res.actor_objective)) return res;

    ws.neg_mean_grad = Eigen::MatrixXd::Constant(1, n, -inv_n);
    nn::backward_into(agent.critic, ws.critic_mu_cache, ws.neg_mean_grad,
                      nullptr, &ws.dq_input, ws.bw);
    ws.actor_out_grad = ws.dq_input.row(3);
    nn::backward_into(agent.actor, ws.actor_cache, ws.actor_out_grad,
                      &ws.actor_grads, nullptr, ws.bw);
    if (!nn::apply_gradients(agent.actor, ws.actor_grads, agent.actor_opt))
        return res;

    res.applied = true;
    nn::soft_update(agent.critic, agent.critic_target, agent.config.tau);
    nn::soft_update(agent.actor, agent.actor_target, agent.config.tau);
    return res;
}

UpdateResult update(DdpgAgent& agent, const ReplayBuffer& buffer,
                    const std::vector<std::size_t>& batch_indices) {
    UpdateWorkspace ws;
    return update(agent, buffer, batch_indices, ws);
}

}  // namespace safecharge
