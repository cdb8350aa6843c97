#include "safecharge/replay.hpp"

#include <stdexcept>

namespace safecharge {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
    data_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
    data_[next_] = t;
    next_ = (next_ + 1) % data_.size();
    if (next_ == 0) full_ = true;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(
    std::size_t n, std::mt19937_64& rng) const {
    const std::size_t sz = size();
    if (n > sz) throw std::invalid_argument("sample larger than buffer");
    // Partial Fisher-Yates over a scratch index vector.
    std::vector<std::size_t> idx(sz);
    for (std::size_t i = 0; i < sz; ++i) idx[i] = i;
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, sz - 1);
        std::size_t j = pick(rng);
        std::swap(idx[i], idx[j]);
        out[i] = idx[i];
    }
    return out;
}

}  // namespace safecharge
