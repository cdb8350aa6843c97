#pragma once

#include <cstdint>
#include <random>

namespace safecharge {

/// Ornstein-Uhlenbeck process x <- x + theta (mu - x) + sigma xi,
/// xi ~ N(0, 1). Values are in action-scale units; callers multiply by the
/// action magnitude.
class OuNoise {
 public:
    OuNoise(double theta, double sigma, double mu, std::uint64_t seed)
        : theta_(theta), sigma_(sigma), mu_(mu), x_(mu), rng_(seed) {}

    /// Restart at the mean; called at every episode boundary.
    void reset() {
        x_ = mu_;
        normal_.reset();
    }

    double sample() {
        x_ += theta_ * (mu_ - x_) + sigma_ * normal_(rng_);
        return x_;
    }

    void set_sigma(double sigma) { sigma_ = sigma; }
    double sigma() const { return sigma_; }
    double value() const { return x_; }

 private:
    double theta_, sigma_, mu_, x_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
};

}  // namespace safecharge
