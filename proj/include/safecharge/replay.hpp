#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <vector>

namespace safecharge {

/// One replay record. `action` is the action actually executed (after any
/// safety perturbation), never the raw actor output. `unsafe` is the
/// threshold indicator of the next state.
struct Transition {
    Eigen::Vector3d state;
    double action = 0.0;
    double reward = 0.0;
    Eigen::Vector3d next_state;
    bool done = false;
    bool unsafe = false;
};

/// Fixed-capacity ring buffer with uniform minibatch sampling (without
/// replacement within one minibatch).
class ReplayBuffer {
 public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    std::size_t size() const { return full_ ? data_.size() : next_; }
    std::size_t capacity() const { return data_.size(); }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

    /// n distinct indices drawn uniformly from [0, size()).
    std::vector<std::size_t> sample_indices(std::size_t n,
                                            std::mt19937_64& rng) const;

 private:
    std::vector<Transition> data_;
    std::size_t next_ = 0;
    bool full_ = false;
};

}  // namespace safecharge
