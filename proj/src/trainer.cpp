#include "safecharge/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <exception>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "safecharge/checkpoint.hpp"
#include "safecharge/csv.hpp"
#include "safecharge/rng.hpp"

namespace safecharge {

using nlohmann::json;

std::vector<double> moving_average(const std::vector<double>& series,
                                   int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    std::vector<double> out;
    out.reserve(series.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= static_cast<std::size_t>(window))
            acc -= series[i - static_cast<std::size_t>(window)];
        double n = std::min<double>(static_cast<double>(i + 1),
                                    static_cast<double>(window));
        out.push_back(acc / n);
    }
    return out;
}

std::optional<double> charging_time_min(const std::vector<double>& soc_series,
                                        double soc_target, double dt_s) {
    for (std::size_t i = 0; i < soc_series.size(); ++i)
        if (soc_series[i] >= soc_target)
            return static_cast<double>(i) * dt_s / 60.0;
    return std::nullopt;
}

namespace {

std::string metrics_row(const EpisodeMetrics& m) {
    std::string line;
    line += format_int(m.episode);
    line += ',';
    line += format_int(static_cast<long long>(m.seed));
    line += ',';
    line += format_int(m.config_id);
    line += ',';
    line += format_double(m.cumulative_return);
    line += ',';
    line += format_double(m.max_t_violation_k);
    line += ',';
    line += format_double(m.max_v_violation_v);
    line += ',';
    line += format_int(m.violation_count);
    line += ',';
    line += format_double(m.charging_time_min);
    line += ',';
    line += format_int(m.steps);
    line += '\n';
    return line;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpisodeMetrics>& rows) {
    std::string out;
    out += kMetricsHeader;
    out += '\n';
    for (const auto& m : rows) out += metrics_row(m);
    write_file(path, out);
}

std::vector<EpisodeMetrics> read_metrics_csv(
    const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw ConfigError(path.string() + ": metrics header mismatch");
    std::vector<EpisodeMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 9)
            throw ConfigError(path.string() + ": bad metrics row '" + line +
                              "'");
        EpisodeMetrics m;
        m.episode = static_cast<int>(parse_double(f[0]));
        m.seed = static_cast<std::uint64_t>(parse_double(f[1]));
        m.config_id = static_cast<int>(parse_double(f[2]));
        m.cumulative_return = parse_double(f[3]);
        m.max_t_violation_k = parse_double(f[4]);
        m.max_v_violation_v = parse_double(f[5]);
        m.violation_count = static_cast<int>(parse_double(f[6]));
        m.charging_time_min = parse_double(f[7]);
        m.steps = static_cast<int>(parse_double(f[8]));
        rows.push_back(m);
    }
    return rows;
}

namespace {

double noise_sigma_factor(bool decay_enabled, int episode, int episodes) {
    if (!decay_enabled) return 1.0;
    double half = 0.5 * static_cast<double>(episodes);
    double frac = half > 0.0 ? static_cast<double>(episode) / half : 1.0;
    return std::max(0.1, 1.0 - 0.9 * std::min(1.0, frac));
}

json agent_config_json(const AgentConfig& a) {
    json j;
    j["gamma"] = a.gamma;
    j["buffer_capacity"] = a.buffer_capacity;
    j["minibatch"] = a.minibatch;
    j["actor_lr"] = a.actor_lr;
    j["critic_lr"] = a.critic_lr;
    j["safety_lr"] = a.safety_lr;
    j["tau"] = a.tau;
    j["actor_hidden"] = a.actor_hidden;
    j["critic_hidden"] = a.critic_hidden;
    j["safety_hidden"] = a.safety_hidden;
    j["ou_theta"] = a.ou_theta;
    j["ou_sigma"] = a.ou_sigma;
    j["ou_mu"] = a.ou_mu;
    j["warmup_steps"] = a.warmup_steps;
    j["noise_decay"] = a.noise_decay;
    j["safety_pretrain_steps"] = a.safety_pretrain_steps;
    j["safety_budget_d"] = a.safety_budget_d;
    return j;
}

struct SeedResult {
    std::vector<EpisodeMetrics> metrics;
    std::string events_jsonl;
    long skipped_updates = 0;
};

class SeedTrainer {
 public:
    SeedTrainer(const TrainRun& train, std::uint64_t seed, const StepHook& hook)
        : run_(train.run),
          output_dir_(train.output_dir),
          seed_(seed),
          hook_(hook),
          buffer_(run_.agent.buffer_capacity),
          config_rng_(make_engine(seed, RngStream::config_draw)),
          replay_rng_(make_engine(seed, RngStream::replay_sampling)),
          pretrain_rng_(make_engine(seed, RngStream::safety_pretrain)),
          noise_(run_.agent.ou_theta, run_.agent.ou_sigma, run_.agent.ou_mu,
                 make_engine(seed, RngStream::exploration_noise)()),
          agent_(make_agent(run_.agent, run_.configs.front().i_max_a, seed)),
          safety_(make_safety_layer(run_.agent.safety_hidden,
                                    run_.agent.safety_lr,
                                    run_.agent.safety_budget_d,
                                    make_engine(seed, RngStream::safety_init)(),
                                    run_.configs.front().i_max_a)) {}

    SeedResult train();

 private:
    void pretrain_safety();
    void do_updates(SeedResult& result);
    void remember_unsafe(const Transition& t);
    void build_safety_batch(const std::vector<std::size_t>& idx,
                            std::mt19937_64& rng);
    void append_event(int episode, int step, double raw,
                      const PerturbResult& pr, const SafetySignal& sig,
                      SeedResult& result) const;
    void snapshot();
    [[noreturn]] void abort_diverged(const std::string& where);
    std::filesystem::path seed_dir() const {
        return output_dir_ / "checkpoints" / ("seed_" + std::to_string(seed_));
    }
    AgentCheckpoint current_checkpoint() const {
        return AgentCheckpoint{agent_, run_.safety_enabled, safety_, seed_};
    }

    static constexpr int kMaxConsecutiveSkips = 50;
    static constexpr std::size_t kUnsafeReservoirCapacity = 8192;

    const RunConfig& run_;
    std::filesystem::path output_dir_;
    std::uint64_t seed_;
    const StepHook& hook_;
    ReplayBuffer buffer_;
    std::mt19937_64 config_rng_, replay_rng_, pretrain_rng_;
    OuNoise noise_;
    DdpgAgent agent_;
    SafetyLayer safety_;
    AgentCheckpoint last_good_;
    bool have_snapshot_ = false;
    int consecutive_skips_ = 0;
    UpdateWorkspace update_ws_;
    SafetyUpdateWorkspace safety_ws_;
    Eigen::MatrixXd safety_states_;
    Eigen::VectorXd safety_actions_, safety_targets_;
    std::vector<Transition> unsafe_reservoir_;
    std::size_t unsafe_reservoir_next_ = 0;
};

void SeedTrainer::snapshot() {
    last_good_ = current_checkpoint();
    have_snapshot_ = true;
}

void SeedTrainer::abort_diverged(const std::string& where) {
    std::filesystem::path dir = seed_dir() / "last_good";
    if (have_snapshot_) save_agent_checkpoint(last_good_, dir);
    throw TrainingDiverged("non-finite training state (" + where + "), seed " +
                           std::to_string(seed_) +
                           (have_snapshot_
                                ? "; last-good checkpoint written to " +
                                      dir.string()
                                : ""));
}

void SeedTrainer::pretrain_safety() {
    const int steps = run_.agent.safety_pretrain_steps;
    const int n_configs = static_cast<int>(run_.configs.size());
    std::uniform_int_distribution<int> pick_config(0, n_configs - 1);
    std::uniform_real_distribution<double> pick_action(agent_.action_lo,
                                                       agent_.action_hi);
    int collected = 0;
    while (collected < steps) {
        const BatteryConfig& cfg = run_.configs[pick_config(pretrain_rng_)];
        BatteryState state = reset(cfg);
        for (int i = 0; i < cfg.max_steps && collected < steps; ++i) {
            double a = pick_action(pretrain_rng_);
            auto [next_state, out] = step(cfg, state, a);
            Transition t{observe(cfg, state), a, out.reward,
                         out.next_observation, out.done, out.unsafe};
            buffer_.push(t);
            remember_unsafe(t);
            ++collected;
            state = next_state;
            if (out.done) break;
        }
    }
    const int batch = std::min<int>(run_.agent.minibatch,
                                    static_cast<int>(buffer_.size()));
    for (int i = 0; i < steps; ++i) {
        auto idx = buffer_.sample_indices(static_cast<std::size_t>(batch),
                                          pretrain_rng_);
        build_safety_batch(idx, pretrain_rng_);
        update_safety(safety_, safety_states_, safety_actions_,
                      safety_targets_, safety_ws_);
    }
}

// Unsafe labels are rare along healthy trajectories, which starves the
// regression of positives and leaves the margin stuck below the decision
// boundary. Rebalance by filling half the batch from a reservoir of unsafe
// transitions once any exist.
void SeedTrainer::build_safety_batch(const std::vector<std::size_t>& idx,
                                     std::mt19937_64& rng) {
    const int n = static_cast<int>(idx.size());
    safety_states_.resize(3, n);
    safety_actions_.resize(n);
    safety_targets_.resize(n);
    const int from_reservoir = unsafe_reservoir_.empty() ? 0 : n / 2;
    std::uniform_int_distribution<std::size_t> pick_unsafe(
        0, unsafe_reservoir_.empty() ? 0 : unsafe_reservoir_.size() - 1);
    for (int k = 0; k < n; ++k) {
        const Transition& t =
            k < from_reservoir ? unsafe_reservoir_[pick_unsafe(rng)]
                               : buffer_[idx[static_cast<std::size_t>(k)]];
        safety_states_.col(k) = t.state;
        safety_actions_(k) = t.action;
        safety_targets_(k) = t.unsafe ? 1.0 : 0.0;
    }
}

void SeedTrainer::do_updates(SeedResult& result) {
    auto idx = buffer_.sample_indices(
        static_cast<std::size_t>(run_.agent.minibatch), replay_rng_);
    UpdateResult u = update(agent_, buffer_, idx, update_ws_);
    if (!u.applied) {
        ++result.skipped_updates;
        if (++consecutive_skips_ >= kMaxConsecutiveSkips)
            abort_diverged("persistent non-finite losses");
    } else {
        consecutive_skips_ = 0;
    }

    if (run_.safety_enabled) {
        build_safety_batch(idx, replay_rng_);
        SafetyUpdateResult s = update_safety(safety_, safety_states_,
                                             safety_actions_, safety_targets_,
                                             safety_ws_);
        if (!s.applied) ++result.skipped_updates;
    }
}

void SeedTrainer::remember_unsafe(const Transition& t) {
    if (!t.unsafe) return;
    if (unsafe_reservoir_.size() < kUnsafeReservoirCapacity) {
        unsafe_reservoir_.push_back(t);
    } else {
        unsafe_reservoir_[unsafe_reservoir_next_] = t;
        unsafe_reservoir_next_ =
            (unsafe_reservoir_next_ + 1) % kUnsafeReservoirCapacity;
    }
}

void SeedTrainer::append_event(int episode, int step, double raw,
                               const PerturbResult& pr,
                               const SafetySignal& sig,
                               SeedResult& result) const {
    // Hand-rolled line to keep shortest round-trip float formatting.
    std::string& out = result.events_jsonl;
    out += "{\"episode\":" + format_int(episode);
    out += ",\"step\":" + format_int(step);
    out += ",\"raw_action\":" + format_double(raw);
    out += ",\"safe_action\":" + format_double(pr.action);
    out += ",\"g\":" + format_double(sig.g);
    out += ",\"c\":" + format_double(sig.c);
    out += std::string(",\"infeasible\":") + (pr.infeasible ? "true" : "false");
    out += "}\n";
}

SeedResult SeedTrainer::train() {
    SeedResult result;
    const int episodes = run_.episodes;
    const int n_configs = static_cast<int>(run_.configs.size());
    std::uniform_int_distribution<int> pick_config(0, n_configs - 1);

    if (run_.safety_enabled && run_.agent.safety_pretrain_steps > 0)
        pretrain_safety();
    snapshot();

    for (int ep = 0; ep < episodes; ++ep) {
        const int config_id = pick_config(config_rng_);
        const BatteryConfig& cfg = run_.configs[static_cast<std::size_t>(config_id)];
        BatteryState state = reset(cfg);
        noise_.reset();
        noise_.set_sigma(run_.agent.ou_sigma *
                         noise_sigma_factor(run_.agent.noise_decay, ep, episodes));

        EpisodeMetrics m;
        m.episode = ep;
        m.seed = seed_;
        m.config_id = config_id;
        std::vector<double> socs;
        socs.reserve(static_cast<std::size_t>(cfg.max_steps) + 1);
        socs.push_back(state.soc);

        for (int step_i = 1; step_i <= cfg.max_steps; ++step_i) {
            Eigen::Vector3d obs = observe(cfg, state);
            double raw = select_action(agent_, obs, noise_, /*explore=*/true);
            double safe = raw;
            PerturbResult pr;
            SafetySignal sig;
            if (run_.safety_enabled) {
                sig = safety_signal(safety_, obs, raw);
                pr = perturb_action(raw, {sig.g, sig.c, safety_.budget_d,
                                          agent_.action_lo, agent_.action_hi});
                safe = pr.action;
                if (pr.perturbed) append_event(ep, step_i, raw, pr, sig, result);
            }

            auto [next_state, out] = step(cfg, state, safe);
            Transition t{obs, safe, out.reward, out.next_observation, out.done,
                         out.unsafe};
            buffer_.push(t);
            if (run_.safety_enabled) remember_unsafe(t);

            if (buffer_.size() >=
                static_cast<std::size_t>(run_.agent.warmup_steps))
                do_updates(result);

            m.cumulative_return += out.reward;
            m.max_t_violation_k = std::max(m.max_t_violation_k, out.t_violation);
            m.max_v_violation_v = std::max(m.max_v_violation_v, out.v_violation);
            if (out.unsafe) ++m.violation_count;
            m.steps = step_i;

            if (hook_) {
                StepEvent ev;
                ev.seed = seed_;
                ev.episode = ep;
                ev.step = step_i;
                ev.config_id = config_id;
                ev.observation = obs;
                ev.raw_action = raw;
                ev.safe_action = safe;
                ev.buffered_action = t.action;
                ev.reward = out.reward;
                ev.t_violation = out.t_violation;
                ev.v_violation = out.v_violation;
                ev.unsafe = out.unsafe;
                ev.done = out.done;
                ev.perturbed = pr.perturbed;
                ev.infeasible = pr.infeasible;
                ev.g = sig.g;
                ev.c = sig.c;
                hook_(ev);
            }

            state = next_state;
            socs.push_back(state.soc);
            if (out.done) break;
        }

        auto ct = charging_time_min(socs, run_.charging_time_soc, cfg.dt_s);
        m.charging_time_min = ct ? *ct : -1.0;
        result.metrics.push_back(m);

        if (!agent_.actor.all_finite() || !agent_.critic.all_finite() ||
            (run_.safety_enabled && !safety_.net.all_finite()))
            abort_diverged("episode " + std::to_string(ep));
        snapshot();

        if (run_.checkpoint_interval > 0 &&
            (ep + 1) % run_.checkpoint_interval == 0 && ep + 1 < episodes)
            save_agent_checkpoint(current_checkpoint(),
                                  seed_dir() / ("ep_" + std::to_string(ep + 1)));
    }

    save_agent_checkpoint(current_checkpoint(), seed_dir() / "final");
    return result;
}

}  // namespace

std::vector<EpisodeMetrics> run_training(const TrainRun& train,
                                         const StepHook& hook) {
    const RunConfig& run = train.run;
    if (run.episodes <= 0) throw ConfigError("episodes must be > 0");
    if (run.seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (run.configs.empty()) throw ConfigError("configs must be nonempty");
    if (std::set<std::uint64_t>(run.seeds.begin(), run.seeds.end()).size() !=
        run.seeds.size())
        throw ConfigError("seeds must be distinct");
    run.agent.validate();
    for (const auto& c : run.configs) validate(c);

    std::error_code ec;
    std::filesystem::create_directories(train.output_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " +
                                 train.output_dir.string() + ": " + ec.message());

    // run_info doubles as the writability probe before any training starts.
    json info;
    info["format"] = "safecharge-run-v1";
    info["mode"] = run.safety_enabled ? "safety" : "baseline";
    info["episodes"] = run.episodes;
    info["seeds"] = run.seeds;
    json cfg_ids = json::array();
    for (const auto& c : run.configs) cfg_ids.push_back(c.id);
    info["battery_configs"] = std::move(cfg_ids);
    info["charging_time_soc"] = run.charging_time_soc;
    info["checkpoint_interval"] = run.checkpoint_interval;
    info["agent"] = agent_config_json(run.agent);
    write_file(train.output_dir / "run_info.json", info.dump(2) + "\n");

    const std::size_t n_seeds = run.seeds.size();
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t workers = std::min<std::size_t>(n_seeds, hw);
    if (train.max_parallel_seeds > 0)
        workers = std::min<std::size_t>(
            workers, static_cast<std::size_t>(train.max_parallel_seeds));

    std::vector<SeedResult> results(n_seeds);
    std::vector<std::exception_ptr> errors(n_seeds);

    auto run_one = [&](std::size_t i) {
        try {
            SeedTrainer trainer(train, run.seeds[i], hook);
            results[i] = trainer.train();
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < n_seeds; ++i) run_one(i);
    } else {
        for (std::size_t base = 0; base < n_seeds; base += workers) {
            std::vector<std::thread> pool;
            for (std::size_t i = base; i < std::min(base + workers, n_seeds); ++i)
                pool.emplace_back(run_one, i);
            for (auto& t : pool) t.join();
        }
    }
    for (std::size_t i = 0; i < n_seeds; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);

    std::vector<EpisodeMetrics> all;
    all.reserve(n_seeds * static_cast<std::size_t>(run.episodes));
    for (std::size_t i = 0; i < n_seeds; ++i) {
        for (const auto& m : results[i].metrics) all.push_back(m);
        if (run.safety_enabled)
            write_file(train.output_dir /
                           ("events_seed_" + std::to_string(run.seeds[i]) +
                            ".jsonl"),
                       results[i].events_jsonl);
    }
    write_metrics_csv(train.output_dir / "metrics.csv", all);
    return all;
}

}  // namespace safecharge
