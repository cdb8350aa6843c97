#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>

#include "safecharge/safety.hpp"

using namespace safecharge;

namespace {

// Brute-force QP oracle: minimize 1/2 (a - raw)^2 over the feasible grid
// points of [a_lo, a_hi] with spacing `res`. Returns nullopt when no grid
// point is feasible.
std::optional<double> grid_projection(double raw, const SafetyConstraintSet& cs,
                                      double res) {
    std::optional<double> best;
    double best_cost = 0.0;
    const long n = std::lround((cs.a_hi - cs.a_lo) / res);
    for (long i = 0; i <= n; ++i) {
        double a = cs.a_lo + i * res;
        if (i == n) a = cs.a_hi;
        if (cs.g * a + cs.c > cs.d) continue;
        double cost = (a - raw) * (a - raw);
        if (!best || cost < best_cost) {
            best = a;
            best_cost = cost;
        }
    }
    return best;
}

SafetyLayer zeroed_layer() {
    SafetyLayer layer = make_safety_layer({32, 32}, 1e-3, 0.0, 5);
    layer.net.weights.back().setZero();
    layer.net.biases.back().setZero();
    return layer;
}

struct Labeled {
    Eigen::Vector3d obs;
    double action;
    double target;
};

// Synthetic states labeled analytically from the thresholds, in the same
// normalized coordinates the environment emits.
std::vector<Labeled> synthetic_states(int n_safe, int n_unsafe,
                                      const BatteryConfig& cfg,
                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> temp(263.0, 348.0);
    std::uniform_real_distribution<double> volt(2.0, 4.6);
    std::uniform_real_distribution<double> soc(0.0, 1.0);
    std::uniform_real_distribution<double> act(-cfg.i_max_a, 0.0);
    std::vector<Labeled> out;
    int safe_left = n_safe, unsafe_left = n_unsafe;
    while (safe_left > 0 || unsafe_left > 0) {
        double t = temp(rng), v = volt(rng);
        int k = safety_target(cfg, t, v);
        if (k == 1 && unsafe_left > 0)
            --unsafe_left;
        else if (k == 0 && safe_left > 0)
            --safe_left;
        else
            continue;
        Labeled sample;
        sample.obs = Eigen::Vector3d((t - 273.15) / 50.0, v / 5.0, soc(rng));
        sample.action = act(rng);
        sample.target = k;
        out.push_back(sample);
    }
    return out;
}

}  // namespace

TEST_CASE("perturb_action leaves feasible actions untouched") {
    SafetyConstraintSet cs{.g = 0.3, .c = -1.0, .d = 0.0, .a_lo = -4.2,
                           .a_hi = 0.0};
    double raw = -1.2345678901234567;
    PerturbResult r = perturb_action(raw, cs);
    CHECK(r.action == raw);  // bit-exact no-op
    CHECK_FALSE(r.perturbed);
    CHECK_FALSE(r.infeasible);
}

TEST_CASE("perturb_action satisfied constraint example") {
    // g raw + c = -4 <= d = -2: inactive
    SafetyConstraintSet cs{.g = 1.0, .c = 0.0, .d = -2.0, .a_lo = -4.2,
                           .a_hi = 0.0};
    PerturbResult r = perturb_action(-4.0, cs);
    CHECK(r.action == -4.0);
    CHECK_FALSE(r.perturbed);
}

TEST_CASE("perturb_action projects onto the constraint boundary") {
    SafetyConstraintSet cs{.g = 1.0, .c = 0.0, .d = -2.0, .a_lo = -4.2,
                           .a_hi = 0.0};
    PerturbResult r = perturb_action(-1.0, cs);  // violates: -1 > -2
    CHECK(r.perturbed);
    CHECK_FALSE(r.infeasible);
    CHECK(r.action == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("perturb_action falls back when nothing in the box is feasible") {
    SUBCASE("action-independent violation (g = 0)") {
        SafetyConstraintSet cs{.g = 0.0, .c = 1.0, .d = 0.0, .a_lo = -4.2,
                               .a_hi = 0.0};
        PerturbResult r = perturb_action(-2.0, cs);
        CHECK(r.perturbed);
        CHECK(r.infeasible);
        CHECK(r.action == 0.0);  // most conservative in-box action
    }
    SUBCASE("boundary outside the box") {
        SafetyConstraintSet cs{.g = 1.0, .c = 10.0, .d = 0.0, .a_lo = -4.2,
                               .a_hi = 0.0};  // needs a <= -10
        PerturbResult r = perturb_action(-1.0, cs);
        CHECK(r.infeasible);
        CHECK(r.action == 0.0);
    }
}

TEST_CASE("perturb_action matches the brute-force grid oracle") {
    const double res = 1e-4;
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> g_dist(-3.0, 3.0);
    std::uniform_real_distribution<double> c_dist(-3.0, 3.0);
    std::uniform_real_distribution<double> d_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> raw_dist(-4.2, 0.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (int i = 0; i < 2000; ++i) {
        SafetyConstraintSet cs;
        cs.g = coin(rng) < 0.05 ? 0.0 : g_dist(rng);
        cs.c = c_dist(rng);
        cs.d = coin(rng) < 0.5 ? 0.0 : d_dist(rng);
        cs.a_lo = -4.2;
        cs.a_hi = 0.0;
        double raw = raw_dist(rng);

        PerturbResult r = perturb_action(raw, cs);
        auto oracle = grid_projection(raw, cs, res);

        CHECK(r.action >= cs.a_lo);
        CHECK(r.action <= cs.a_hi);
        if (!oracle) {
            CHECK(r.infeasible);
            CHECK(r.action == 0.0);
        } else {
            CHECK_FALSE(r.infeasible);
            CHECK(std::abs(r.action - *oracle) <= res + 1e-9);
            // minimality against every feasible grid point
            CHECK((r.action - raw) * (r.action - raw) <=
                  (*oracle - raw) * (*oracle - raw) + 2 * res);
            if (cs.g != 0.0)
                CHECK(cs.g * r.action + cs.c <= cs.d + 1e-9);
        }
        // idempotence
        PerturbResult again = perturb_action(r.action, cs);
        CHECK(again.action == r.action);
    }
}

TEST_CASE("safety_target thresholds match the violation definition") {
    BatteryConfig cfg;  // t_safe 308.15 K (35 C), v_safe 4.2 V
    CHECK(safety_target(cfg, 303.15, 4.0) == 0);   // 30 C, 4.0 V
    CHECK(safety_target(cfg, 308.15, 2.5) == 1);   // exactly 35 C
    CHECK(safety_target(cfg, 293.15, 4.25) == 1);  // 20 C, high voltage
    CHECK(safety_target(cfg, 293.15, 4.2) == 1);   // exactly v_safe
}

TEST_CASE("safety targets agree with the environment's unsafe flag") {
    BatteryConfig cfg;
    cfg.soc_target = 1.0;
    cfg.initial_voltage_v = 3.9;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pick(-cfg.i_max_a, 0.0);
    BatteryState s = reset(cfg);
    for (int i = 0; i < 200; ++i) {
        auto [next, out] = step(cfg, s, pick(rng));
        CHECK(safety_target(cfg, next.temp_k, next.voltage_v) ==
              (out.unsafe ? 1 : 0));
        s = next;
        if (out.done) s = reset(cfg);
    }
}

TEST_CASE("zero output layer emits a zero signal and never perturbs") {
    SafetyLayer layer = zeroed_layer();
    Eigen::Vector3d state(0.5, 0.7, 0.3);
    SafetySignal sig = safety_signal(layer, state, -2.0);
    CHECK(sig.g == 0.0);
    // raw output 0 sits below the 0.5 decision boundary: margin -0.5
    CHECK(sig.c == -0.5);
    PerturbResult r = perturb_action(
        -2.0, {sig.g, sig.c, layer.budget_d, -4.2, 0.0});
    CHECK_FALSE(r.perturbed);
    CHECK(r.action == -2.0);
}

TEST_CASE("safety_signal is reproducible and linearizes the margin") {
    SafetyLayer a = make_safety_layer({128, 128}, 1e-3, 0.0, 77);
    SafetyLayer b = make_safety_layer({128, 128}, 1e-3, 0.0, 77);
    Eigen::Vector3d state(0.4, 0.8, 0.6);
    SafetySignal sa = safety_signal(a, state, -1.0);
    SafetySignal sb = safety_signal(b, state, -1.0);
    CHECK(sa.g == sb.g);
    CHECK(sa.c == sb.c);

    // g a + c evaluated at the linearization point equals the margin there
    double u = safety_prediction(a, state, -1.0);
    CHECK(sa.g * -1.0 + sa.c == doctest::Approx(u - 0.5).epsilon(1e-12));

    // finite-difference check of g
    const double h = 1e-6;
    double up = safety_prediction(a, state, -1.0 + h);
    double down = safety_prediction(a, state, -1.0 - h);
    CHECK(std::abs(sa.g - (up - down) / (2 * h)) <= 1e-5);
}

TEST_CASE("update_safety loss arithmetic") {
    SafetyLayer layer = zeroed_layer();
    Eigen::MatrixXd states(3, 1);
    states.col(0) = Eigen::Vector3d(0.1, 0.2, 0.3);
    Eigen::VectorXd actions(1), targets(1);
    actions << -1.0;
    targets << 1.0;  // prediction 0, target 1 -> loss 1
    SafetyUpdateResult r = update_safety(layer, states, actions, targets);
    CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.applied);
}

TEST_CASE("update_safety with exact predictions leaves sgd parameters fixed") {
    SafetyLayer layer = zeroed_layer();
    layer.opt = nn::make_optimizer(nn::OptimizerMode::sgd, 1e-3, layer.net);
    nn::Mlp before = layer.net;
    Eigen::MatrixXd states(3, 2);
    states.col(0) = Eigen::Vector3d(0.1, 0.2, 0.3);
    states.col(1) = Eigen::Vector3d(-0.4, 0.5, 0.9);
    Eigen::VectorXd actions(2), targets(2);
    actions << -1.0, -2.0;
    targets << 0.0, 0.0;  // zeroed net already predicts 0
    SafetyUpdateResult r = update_safety(layer, states, actions, targets);
    CHECK(r.loss == 0.0);
    for (std::size_t k = 0; k < layer.net.weights.size(); ++k)
        CHECK(layer.net.weights[k] == before.weights[k]);
}

TEST_CASE("safety classifier reaches 95% held-out accuracy") {
    BatteryConfig cfg;
    std::mt19937_64 rng(2718);
    auto train_set = synthetic_states(250, 250, cfg, rng);
    auto held_out = synthetic_states(250, 250, cfg, rng);

    SafetyLayer layer = make_safety_layer({128, 128}, 1e-3, 0.0, 91);
    const int batch = 64;
    std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
    Eigen::MatrixXd states(3, batch);
    Eigen::VectorXd actions(batch), targets(batch);
    for (int it = 0; it < 2000; ++it) {
        for (int k = 0; k < batch; ++k) {
            const Labeled& s = train_set[pick(rng)];
            states.col(k) = s.obs;
            actions(k) = s.action;
            targets(k) = s.target;
        }
        update_safety(layer, states, actions, targets);
    }

    int correct = 0;
    for (const auto& s : held_out) {
        double u = safety_prediction(layer, s.obs, s.action);
        int predicted = u >= 0.5 ? 1 : 0;
        if (predicted == static_cast<int>(s.target)) ++correct;
    }
    double accuracy = static_cast<double>(correct) / held_out.size();
    CHECK(accuracy >= 0.95);

    // trained margins order states by proximity to the unsafe region
    Eigen::Vector3d cold((273.0 - 273.15) / 50.0, 2.5 / 5.0, 0.1);
    Eigen::Vector3d near_threshold((307.0 - 273.15) / 50.0, 4.19 / 5.0, 0.9);
    SafetySignal sig_cold = safety_signal(layer, cold, -1.0);
    SafetySignal sig_near = safety_signal(layer, near_threshold, -1.0);
    double margin_cold = sig_cold.g * -1.0 + sig_cold.c;
    double margin_near = sig_near.g * -1.0 + sig_near.c;
    CHECK(margin_near > margin_cold);
}
