#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "safecharge/battery.hpp"
#include "safecharge/ddpg.hpp"

namespace safecharge {

/// Loads and validates one battery configuration. Every field is required
/// (unit suffixes and all); unknown fields are rejected. Throws ConfigError
/// with the offending field or parse location.
BatteryConfig load_battery_config(const std::filesystem::path& path);

struct RunConfig {
    int episodes = 300;
    std::vector<std::uint64_t> seeds;
    std::vector<std::filesystem::path> battery_config_paths;  // resolved
    std::vector<BatteryConfig> configs;
    bool safety_enabled = true;
    double charging_time_soc = 0.8;
    int checkpoint_interval = 0;  // episodes; 0 = final checkpoint only
    AgentConfig agent;
};

/// Loads a run configuration; battery config paths are resolved relative to
/// the run file's directory and loaded/validated eagerly.
RunConfig load_run_config(const std::filesystem::path& path);

/// validate-config entry point: dispatches on the file's fields, returns a
/// one-line description of what was validated. Throws ConfigError.
std::string validate_config_file(const std::filesystem::path& path);

}  // namespace safecharge
