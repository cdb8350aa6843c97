#include "safecharge/checkpoint.hpp"

#include <json.hpp>

#include "safecharge/csv.hpp"

namespace safecharge {

using nlohmann::json;

namespace {

constexpr const char* kMlpFormat = "safecharge-mlp-v1";
constexpr const char* kAgentFormat = "safecharge-agent-v1";

json matrix_to_json(const Eigen::MatrixXd& m) {
    json flat = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

Eigen::MatrixXd matrix_from_json(const json& flat, Eigen::Index rows,
                                 Eigen::Index cols) {
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw CheckpointError("matrix size mismatch in checkpoint");
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = flat[static_cast<std::size_t>(i++)].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json flat = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) flat.push_back(v(i));
    return flat;
}

Eigen::VectorXd vector_from_json(const json& flat, Eigen::Index size) {
    if (static_cast<Eigen::Index>(flat.size()) != size)
        throw CheckpointError("vector size mismatch in checkpoint");
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i)
        v(i) = flat[static_cast<std::size_t>(i)].get<double>();
    return v;
}

const char* activation_name(nn::OutputActivation a) {
    return a == nn::OutputActivation::identity ? "identity" : "scaled_tanh";
}

nn::OutputActivation activation_from_name(const std::string& s) {
    if (s == "identity") return nn::OutputActivation::identity;
    if (s == "scaled_tanh") return nn::OutputActivation::scaled_tanh;
    throw CheckpointError("unknown output activation: " + s);
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

void save_mlp(const nn::Mlp& net, const nn::Optimizer& opt,
              std::uint64_t seed, const std::filesystem::path& path) {
    if (!net.all_finite())
        throw CheckpointError("refusing to save non-finite parameters");
    json doc;
    doc["format"] = kMlpFormat;
    doc["layer_sizes"] = net.layer_sizes();
    doc["output_activation"] = activation_name(net.output_activation);
    doc["out_lo"] = net.out_lo;
    doc["out_hi"] = net.out_hi;
    doc["seed"] = seed;
    json weights = json::array(), biases = json::array();
    for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
    for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);

    json o;
    o["mode"] = opt.mode == nn::OptimizerMode::adam ? "adam" : "sgd";
    o["learning_rate"] = opt.learning_rate;
    o["beta1"] = opt.beta1;
    o["beta2"] = opt.beta2;
    o["epsilon"] = opt.epsilon;
    o["step_count"] = opt.step_count;
    if (opt.mode == nn::OptimizerMode::adam) {
        json mw = json::array(), vw = json::array(), mb = json::array(),
             vb = json::array();
        for (const auto& m : opt.m_w) mw.push_back(matrix_to_json(m));
        for (const auto& m : opt.v_w) vw.push_back(matrix_to_json(m));
        for (const auto& m : opt.m_b) mb.push_back(vector_to_json(m));
        for (const auto& m : opt.v_b) vb.push_back(vector_to_json(m));
        o["m_w"] = std::move(mw);
        o["v_w"] = std::move(vw);
        o["m_b"] = std::move(mb);
        o["v_b"] = std::move(vb);
    }
    doc["optimizer"] = std::move(o);

    write_file(path, doc.dump());
}

LoadedMlp load_mlp(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw CheckpointError("cannot parse checkpoint " + path.string() +
                              ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kMlpFormat)
            throw CheckpointError("unsupported checkpoint format in " +
                                  path.string());
        LoadedMlp loaded;
        auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
        if (sizes.size() < 2) throw CheckpointError("bad layer_sizes");
        loaded.net.output_activation =
            activation_from_name(doc.at("output_activation").get<std::string>());
        loaded.net.out_lo = doc.at("out_lo").get<double>();
        loaded.net.out_hi = doc.at("out_hi").get<double>();
        loaded.seed = doc.at("seed").get<std::uint64_t>();
        const json& weights = doc.at("weights");
        const json& biases = doc.at("biases");
        if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
            throw CheckpointError("layer count mismatch");
        for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
            loaded.net.weights.push_back(
                matrix_from_json(weights[k], sizes[k + 1], sizes[k]));
            loaded.net.biases.push_back(vector_from_json(biases[k], sizes[k + 1]));
        }

        const json& o = doc.at("optimizer");
        std::string mode = o.at("mode").get<std::string>();
        loaded.opt.mode = mode == "adam" ? nn::OptimizerMode::adam
                                         : nn::OptimizerMode::sgd;
        loaded.opt.learning_rate = o.at("learning_rate").get<double>();
        loaded.opt.beta1 = o.at("beta1").get<double>();
        loaded.opt.beta2 = o.at("beta2").get<double>();
        loaded.opt.epsilon = o.at("epsilon").get<double>();
        loaded.opt.step_count = o.at("step_count").get<long>();
        if (loaded.opt.mode == nn::OptimizerMode::adam) {
            const json& mw = o.at("m_w");
            const json& vw = o.at("v_w");
            const json& mb = o.at("m_b");
            const json& vb = o.at("v_b");
            for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
                loaded.opt.m_w.push_back(
                    matrix_from_json(mw[k], sizes[k + 1], sizes[k]));
                loaded.opt.v_w.push_back(
                    matrix_from_json(vw[k], sizes[k + 1], sizes[k]));
                loaded.opt.m_b.push_back(vector_from_json(mb[k], sizes[k + 1]));
                loaded.opt.v_b.push_back(vector_from_json(vb[k], sizes[k + 1]));
            }
        }
        return loaded;
    } catch (const json::exception& e) {
        throw CheckpointError("malformed checkpoint " + path.string() + ": " +
                              e.what());
    }
}

namespace {

json agent_config_to_json(const AgentConfig& c) {
    json j;
    j["gamma"] = c.gamma;
    j["buffer_capacity"] = c.buffer_capacity;
    j["minibatch"] = c.minibatch;
    j["actor_lr"] = c.actor_lr;
    j["critic_lr"] = c.critic_lr;
    j["safety_lr"] = c.safety_lr;
    j["tau"] = c.tau;
    j["actor_hidden"] = c.actor_hidden;
    j["critic_hidden"] = c.critic_hidden;
    j["safety_hidden"] = c.safety_hidden;
    j["ou_theta"] = c.ou_theta;
    j["ou_sigma"] = c.ou_sigma;
    j["ou_mu"] = c.ou_mu;
    j["warmup_steps"] = c.warmup_steps;
    j["noise_decay"] = c.noise_decay;
    j["safety_pretrain_steps"] = c.safety_pretrain_steps;
    j["safety_budget_d"] = c.safety_budget_d;
    return j;
}

AgentConfig agent_config_from_json(const json& j) {
    AgentConfig c;
    c.gamma = j.at("gamma").get<double>();
    c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    c.minibatch = j.at("minibatch").get<int>();
    c.actor_lr = j.at("actor_lr").get<double>();
    c.critic_lr = j.at("critic_lr").get<double>();
    c.safety_lr = j.at("safety_lr").get<double>();
    c.tau = j.at("tau").get<double>();
    c.actor_hidden = j.at("actor_hidden").get<std::vector<int>>();
    c.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    c.safety_hidden = j.at("safety_hidden").get<std::vector<int>>();
    c.ou_theta = j.at("ou_theta").get<double>();
    c.ou_sigma = j.at("ou_sigma").get<double>();
    c.ou_mu = j.at("ou_mu").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<int>();
    c.noise_decay = j.at("noise_decay").get<bool>();
    c.safety_pretrain_steps = j.at("safety_pretrain_steps").get<int>();
    c.safety_budget_d = j.at("safety_budget_d").get<double>();
    return c;
}

std::string checksum_hex(const std::filesystem::path& path) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path))));
    return buf;
}

}  // namespace

void save_agent_checkpoint(const AgentCheckpoint& cp,
                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_mlp(cp.agent.actor, cp.agent.actor_opt, cp.seed, dir / "actor.json");
    save_mlp(cp.agent.critic, cp.agent.critic_opt, cp.seed, dir / "critic.json");
    nn::Optimizer none;  // targets carry no optimizer state
    none.mode = nn::OptimizerMode::sgd;
    save_mlp(cp.agent.actor_target, none, cp.seed, dir / "actor_target.json");
    save_mlp(cp.agent.critic_target, none, cp.seed, dir / "critic_target.json");

    json cfg;
    cfg["agent"] = agent_config_to_json(cp.agent.config);
    cfg["action_lo"] = cp.agent.action_lo;
    cfg["action_hi"] = cp.agent.action_hi;
    write_file(dir / "agent_config.json", cfg.dump(2));

    std::vector<std::string> files = {"actor.json", "critic.json",
                                      "actor_target.json",
                                      "critic_target.json",
                                      "agent_config.json"};
    if (cp.safety_enabled) {
        save_mlp(cp.safety.net, cp.safety.opt, cp.seed, dir / "safety.json");
        files.push_back("safety.json");
    }

    json manifest;
    manifest["format"] = kAgentFormat;
    manifest["safety_enabled"] = cp.safety_enabled;
    manifest["safety_budget_d"] = cp.safety.budget_d;
    manifest["seed"] = cp.seed;
    json sums;
    for (const auto& f : files) sums[f] = checksum_hex(dir / f);
    manifest["checksums"] = std::move(sums);
    write_file(dir / "manifest.json", manifest.dump(2));
}

AgentCheckpoint load_agent_checkpoint(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_file(dir / "manifest.json"));
    } catch (const std::exception& e) {
        throw CheckpointError("cannot read manifest in " + dir.string() + ": " +
                              e.what());
    }
    try {
        if (manifest.at("format").get<std::string>() != kAgentFormat)
            throw CheckpointError("unsupported agent checkpoint format");
        for (const auto& [file, sum] :
             manifest.at("checksums").items()) {
            if (checksum_hex(dir / file) != sum.get<std::string>())
                throw CheckpointError("checksum mismatch for " + file);
        }

        AgentCheckpoint cp;
        cp.seed = manifest.at("seed").get<std::uint64_t>();
        cp.safety_enabled = manifest.at("safety_enabled").get<bool>();

        json cfg = json::parse(read_file(dir / "agent_config.json"));
        cp.agent.config = agent_config_from_json(cfg.at("agent"));
        cp.agent.action_lo = cfg.at("action_lo").get<double>();
        cp.agent.action_hi = cfg.at("action_hi").get<double>();

        LoadedMlp actor = load_mlp(dir / "actor.json");
        LoadedMlp critic = load_mlp(dir / "critic.json");
        cp.agent.actor = std::move(actor.net);
        cp.agent.actor_opt = std::move(actor.opt);
        cp.agent.critic = std::move(critic.net);
        cp.agent.critic_opt = std::move(critic.opt);
        cp.agent.actor_target = load_mlp(dir / "actor_target.json").net;
        cp.agent.critic_target = load_mlp(dir / "critic_target.json").net;

        if (cp.safety_enabled) {
            LoadedMlp safety = load_mlp(dir / "safety.json");
            cp.safety.net = std::move(safety.net);
            cp.safety.opt = std::move(safety.opt);
            cp.safety.budget_d = manifest.at("safety_budget_d").get<double>();
        }
        return cp;
    } catch (const json::exception& e) {
        throw CheckpointError("malformed agent checkpoint in " + dir.string() +
                              ": " + e.what());
    }
}

}  // namespace safecharge
