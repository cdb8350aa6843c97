#pragma once

#include <cstdint>
#include <random>

namespace safecharge {

// Independent random streams derived from one run seed. Every consumer of
// randomness owns its own engine so that adding a draw in one place cannot
// shift any other stream.
enum class RngStream : std::uint64_t {
    weight_init = 1,
    exploration_noise = 2,
    config_draw = 3,
    replay_sampling = 4,
    safety_pretrain = 5,
    safety_init = 6,
};

inline std::mt19937_64 make_engine(std::uint64_t seed, RngStream stream) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(stream)};
    return std::mt19937_64(seq);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    std::seed_seq seq{seed};
    return std::mt19937_64(seq);
}

}  // namespace safecharge
