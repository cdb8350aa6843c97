#include "safecharge/config_io.hpp"

#include <json.hpp>

#include <set>

#include "safecharge/csv.hpp"

namespace safecharge {

using nlohmann::json;

namespace {

json parse_or_throw(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

class FieldReader {
 public:
    FieldReader(const json& doc, std::string context)
        : doc_(doc), context_(std::move(context)) {
        if (!doc.is_object())
            throw ConfigError(context_ + ": expected a JSON object");
    }

    template <typename T>
    T get(const std::string& field) {
        seen_.insert(field);
        if (!doc_.contains(field))
            throw ConfigError(context_ + ": missing field '" + field + "'");
        try {
            return doc_.at(field).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(context_ + ": field '" + field +
                              "' has the wrong type");
        }
    }

    const json& raw(const std::string& field) {
        seen_.insert(field);
        if (!doc_.contains(field))
            throw ConfigError(context_ + ": missing field '" + field + "'");
        return doc_.at(field);
    }

    void reject_unknown() const {
        for (const auto& [key, value] : doc_.items()) {
            if (!seen_.count(key))
                throw ConfigError(context_ + ": unknown field '" + key + "'");
        }
    }

 private:
    const json& doc_;
    std::string context_;
    std::set<std::string> seen_;
};

BatteryConfig battery_config_from_json(const json& doc,
                                       const std::string& context) {
    FieldReader r(doc, context);
    BatteryConfig c;
    c.capacity_ah = r.get<double>("capacity_ah");
    c.mass_kg = r.get<double>("mass_kg");
    c.specific_heat = r.get<double>("specific_heat");
    c.thermal_resistance = r.get<double>("thermal_resistance");
    c.ambient_temp_k = r.get<double>("ambient_temp_k");
    c.internal_resistance_ohm = r.get<double>("internal_resistance_ohm");
    c.entropy_coeff_v_per_k = r.get<double>("entropy_coeff_v_per_k");

    const json& table = r.raw("ocv_table");
    if (!table.is_array())
        throw ConfigError(context + ": ocv_table must be an array of [soc, voltage] pairs");
    c.ocv_table.clear();
    for (const auto& knot : table) {
        if (!knot.is_array() || knot.size() != 2)
            throw ConfigError(context + ": each ocv_table entry must be [soc, voltage]");
        c.ocv_table.push_back(
            {knot[0].get<double>(), knot[1].get<double>()});
    }

    c.v_min = r.get<double>("v_min");
    c.v_max = r.get<double>("v_max");
    c.v_safe = r.get<double>("v_safe");
    c.t_safe_k = r.get<double>("t_safe_k");
    c.i_max_a = r.get<double>("i_max_a");
    c.initial_voltage_v = r.get<double>("initial_voltage_v");
    c.initial_temp_k = r.get<double>("initial_temp_k");
    c.dt_s = r.get<double>("dt_s");
    c.soc_target = r.get<double>("soc_target");
    c.max_steps = r.get<int>("max_steps");
    r.reject_unknown();

    try {
        validate(c);
    } catch (const ConfigError& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return c;
}

AgentConfig agent_config_from_json(const json& doc, const std::string& context) {
    FieldReader r(doc, context);
    AgentConfig a;
    a.gamma = r.get<double>("gamma");
    a.buffer_capacity = r.get<std::size_t>("buffer_capacity");
    a.minibatch = r.get<int>("minibatch");
    a.actor_lr = r.get<double>("actor_lr");
    a.critic_lr = r.get<double>("critic_lr");
    a.safety_lr = r.get<double>("safety_lr");
    a.tau = r.get<double>("tau");
    a.actor_hidden = r.get<std::vector<int>>("actor_hidden");
    a.critic_hidden = r.get<std::vector<int>>("critic_hidden");
    a.safety_hidden = r.get<std::vector<int>>("safety_hidden");
    a.ou_theta = r.get<double>("ou_theta");
    a.ou_sigma = r.get<double>("ou_sigma");
    a.ou_mu = r.get<double>("ou_mu");
    a.warmup_steps = r.get<int>("warmup_steps");
    a.noise_decay = r.get<bool>("noise_decay");
    a.safety_pretrain_steps = r.get<int>("safety_pretrain_steps");
    a.safety_budget_d = r.get<double>("safety_budget_d");
    r.reject_unknown();

    try {
        a.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return a;
}

}  // namespace

BatteryConfig load_battery_config(const std::filesystem::path& path) {
    json doc = parse_or_throw(path);
    BatteryConfig c = battery_config_from_json(doc, path.string());
    c.id = path.stem().string();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json doc = parse_or_throw(path);
    FieldReader r(doc, path.string());
    RunConfig run;
    run.episodes = r.get<int>("episodes");
    run.seeds = r.get<std::vector<std::uint64_t>>("seeds");
    auto rel_paths = r.get<std::vector<std::string>>("battery_configs");
    run.safety_enabled = r.get<bool>("safety_enabled");
    run.charging_time_soc = r.get<double>("charging_time_soc");
    run.checkpoint_interval = r.get<int>("checkpoint_interval");
    run.agent = agent_config_from_json(r.raw("agent"),
                                       path.string() + ": agent");
    r.reject_unknown();

    if (run.episodes <= 0)
        throw ConfigError(path.string() + ": episodes must be > 0");
    if (run.seeds.empty())
        throw ConfigError(path.string() + ": seeds must be nonempty");
    if (rel_paths.empty())
        throw ConfigError(path.string() + ": battery_configs must be nonempty");
    if (run.charging_time_soc < 0.0 || run.charging_time_soc > 1.0)
        throw ConfigError(path.string() + ": charging_time_soc must be in [0, 1]");
    if (run.checkpoint_interval < 0)
        throw ConfigError(path.string() + ": checkpoint_interval must be >= 0");

    const auto base = path.has_parent_path()
                          ? path.parent_path()
                          : std::filesystem::path(".");
    for (const auto& rel : rel_paths) {
        std::filesystem::path p(rel);
        if (p.is_relative()) p = base / p;
        run.battery_config_paths.push_back(p);
        run.configs.push_back(load_battery_config(p));
    }

    const double i_max = run.configs.front().i_max_a;
    for (const auto& c : run.configs)
        if (c.i_max_a != i_max)
            throw ConfigError(path.string() +
                              ": all battery configs in a run must share i_max_a");
    return run;
}

std::string validate_config_file(const std::filesystem::path& path) {
    json doc = parse_or_throw(path);
    if (doc.is_object() && doc.contains("capacity_ah")) {
        battery_config_from_json(doc, path.string());
        return "battery config OK: " + path.string();
    }
    if (doc.is_object() && doc.contains("episodes")) {
        load_run_config(path);
        return "run config OK: " + path.string();
    }
    throw ConfigError(path.string() +
                      ": not a recognized config file (expected battery or run config)");
}

}  // namespace safecharge
