#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "safecharge/ddpg.hpp"
#include "safecharge/mlp.hpp"
#include "safecharge/safety.hpp"

namespace safecharge {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit hash, used for the bundle manifest.
std::uint64_t fnv1a64(const std::string& bytes);

/// Network + optimizer state as one versioned JSON document. Matrices are
/// stored flat in row-major order; doubles round-trip bit-exactly.
void save_mlp(const nn::Mlp& net, const nn::Optimizer& opt,
              std::uint64_t seed, const std::filesystem::path& path);

struct LoadedMlp {
    nn::Mlp net;
    nn::Optimizer opt;
    std::uint64_t seed = 0;
};

LoadedMlp load_mlp(const std::filesystem::path& path);

/// Everything `evaluate` needs from a finished training run.
struct AgentCheckpoint {
    DdpgAgent agent;
    bool safety_enabled = false;
    SafetyLayer safety;  // meaningful only when safety_enabled
    std::uint64_t seed = 0;
};

/// Writes actor/critic/target/safety files plus agent_config.json and a
/// manifest listing each component's FNV-1a checksum.
void save_agent_checkpoint(const AgentCheckpoint& cp,
                           const std::filesystem::path& dir);

/// Verifies the manifest checksums; throws CheckpointError on any mismatch
/// or format problem.
AgentCheckpoint load_agent_checkpoint(const std::filesystem::path& dir);

}  // namespace safecharge
