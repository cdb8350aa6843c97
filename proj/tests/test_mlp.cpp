#include <doctest.h>

#include <cmath>
#include <random>

#include "safecharge/mlp.hpp"

using namespace safecharge;

namespace {

nn::Mlp single_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    nn::Mlp net;
    net.weights = {w};
    net.biases = {b};
    net.output_activation = nn::OutputActivation::identity;
    return net;
}

// Scalar loss L = proj . output, evaluated by a fresh forward pass. Keeping
// the loss linear in the output makes the analytic output gradient trivial
// while still exercising every parameter.
double projected_loss(const nn::Mlp& net, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& proj) {
    return proj.dot(nn::forward(net, x));
}

}  // namespace

TEST_CASE("forward of a zero network is zero") {
    nn::Mlp net = single_layer(Eigen::MatrixXd::Zero(2, 3),
                               Eigen::VectorXd::Zero(2));
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 3.0;
    Eigen::VectorXd y = nn::forward(net, x);
    CHECK(y(0) == 0.0);
    CHECK(y(1) == 0.0);
}

TEST_CASE("forward affine arithmetic") {
    Eigen::MatrixXd w(1, 1);
    w << 2.0;
    Eigen::VectorXd b(1);
    b << 1.0;
    nn::Mlp net = single_layer(w, b);
    Eigen::VectorXd x(1);
    x << 3.0;
    CHECK(nn::forward(net, x)(0) == 7.0);
}

TEST_CASE("forward rejects dimension mismatches") {
    nn::Mlp net = nn::make_mlp({3, 4, 2}, nn::OutputActivation::identity, 1);
    Eigen::VectorXd x(2);
    x << 1.0, 2.0;
    CHECK_THROWS_AS(nn::forward(net, x), std::logic_error);
}

TEST_CASE("initialization is deterministic per seed and respects bounds") {
    auto a = nn::make_mlp({3, 400, 300, 1}, nn::OutputActivation::scaled_tanh,
                          1234, 3e-3, -4.2, 0.0);
    auto b = nn::make_mlp({3, 400, 300, 1}, nn::OutputActivation::scaled_tanh,
                          1234, 3e-3, -4.2, 0.0);
    auto c = nn::make_mlp({3, 400, 300, 1}, nn::OutputActivation::scaled_tanh,
                          1235, 3e-3, -4.2, 0.0);
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
        CHECK(a.weights[k] == b.weights[k]);
        CHECK(a.biases[k] == b.biases[k]);
    }
    bool any_diff = false;
    for (std::size_t k = 0; k < a.weights.size(); ++k)
        if (a.weights[k] != c.weights[k]) any_diff = true;
    CHECK(any_diff);

    CHECK(a.weights[0].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
    CHECK(a.weights[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(400.0));
    CHECK(a.weights[2].cwiseAbs().maxCoeff() <= 3e-3);  // final layer scale
    CHECK(a.weights[2].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("backward on a single linear layer") {
    Eigen::MatrixXd w(1, 3);
    w << 0.5, -1.0, 2.0;
    Eigen::VectorXd b(1);
    b << 0.25;
    nn::Mlp net = single_layer(w, b);
    Eigen::VectorXd x(3);
    x << 1.0, 2.0, -3.0;

    nn::ForwardCache cache;
    nn::forward(net, Eigen::MatrixXd(x), &cache);
    Eigen::MatrixXd input_grad;
    nn::Gradients g = nn::backward(net, cache, Eigen::MatrixXd::Ones(1, 1),
                                   &input_grad);
    // dL/dW = 1 * x^T, dL/db = 1, dL/dx = W^T
    CHECK(g.d_weights[0] == x.transpose());
    CHECK(g.d_biases[0](0) == 1.0);
    CHECK(input_grad.col(0) == w.transpose().col(0));

    nn::Gradients zero = nn::backward(net, cache, Eigen::MatrixXd::Zero(1, 1));
    CHECK(zero.d_weights[0].isZero(0.0));
    CHECK(zero.d_biases[0].isZero(0.0));
}

TEST_CASE("backward detects a stale cache") {
    nn::Mlp net = nn::make_mlp({3, 8, 1}, nn::OutputActivation::identity, 7);
    nn::Mlp other = nn::make_mlp({4, 8, 1}, nn::OutputActivation::identity, 8);
    nn::ForwardCache cache;
    nn::forward(net, Eigen::MatrixXd::Random(3, 2), &cache);
    CHECK_THROWS_AS(
        nn::backward(other, cache, Eigen::MatrixXd::Ones(1, 2)),
        std::logic_error);
    CHECK_THROWS_AS(nn::backward(net, cache, Eigen::MatrixXd::Ones(1, 3)),
                    std::logic_error);
}

TEST_CASE("analytic gradients match central finite differences") {
    // The independent oracle: perturb every parameter and input coordinate
    // by +-h and difference the projected loss.
    const double h = 1e-5;
    std::mt19937_64 rng(20240817);
    std::uniform_int_distribution<int> pick_in(1, 8), pick_hidden(1, 16),
        pick_out(1, 4), pick_depth(0, 2), pick_act(0, 1);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> sizes{pick_in(rng)};
        int depth = pick_depth(rng);
        for (int d = 0; d < depth; ++d) sizes.push_back(pick_hidden(rng));
        sizes.push_back(pick_out(rng));
        auto act = pick_act(rng) ? nn::OutputActivation::scaled_tanh
                                 : nn::OutputActivation::identity;
        nn::Mlp net = nn::make_mlp(sizes, act, rng(), 0.0, -2.0, 0.5);

        Eigen::VectorXd x(sizes.front());
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = unit(rng);
        Eigen::VectorXd proj(sizes.back());
        for (Eigen::Index i = 0; i < proj.size(); ++i) proj(i) = unit(rng);

        nn::ForwardCache cache;
        nn::forward(net, Eigen::MatrixXd(x), &cache);
        Eigen::MatrixXd input_grad;
        nn::Gradients g =
            nn::backward(net, cache, Eigen::MatrixXd(proj), &input_grad);

        auto check_close = [&](double analytic, double fd) {
            CHECK(std::abs(analytic - fd) <= 1e-4 * (1.0 + std::abs(fd)));
        };

        for (std::size_t k = 0; k < net.weights.size(); ++k) {
            for (Eigen::Index r = 0; r < net.weights[k].rows(); ++r)
                for (Eigen::Index cidx = 0; cidx < net.weights[k].cols();
                     ++cidx) {
                    double saved = net.weights[k](r, cidx);
                    net.weights[k](r, cidx) = saved + h;
                    double up = projected_loss(net, x, proj);
                    net.weights[k](r, cidx) = saved - h;
                    double down = projected_loss(net, x, proj);
                    net.weights[k](r, cidx) = saved;
                    check_close(g.d_weights[k](r, cidx), (up - down) / (2 * h));
                }
            for (Eigen::Index r = 0; r < net.biases[k].size(); ++r) {
                double saved = net.biases[k](r);
                net.biases[k](r) = saved + h;
                double up = projected_loss(net, x, proj);
                net.biases[k](r) = saved - h;
                double down = projected_loss(net, x, proj);
                net.biases[k](r) = saved;
                check_close(g.d_biases[k](r), (up - down) / (2 * h));
            }
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            check_close(input_grad(i, 0),
                        (projected_loss(net, xp, proj) -
                         projected_loss(net, xm, proj)) /
                            (2 * h));
        }
    }
}

TEST_CASE("sgd apply_gradients arithmetic") {
    Eigen::MatrixXd w(1, 1);
    w << 1.0;
    nn::Mlp net = single_layer(w, Eigen::VectorXd::Zero(1));
    nn::Optimizer opt = nn::make_optimizer(nn::OptimizerMode::sgd, 0.1, net);
    nn::Gradients g;
    g.d_weights = {Eigen::MatrixXd::Constant(1, 1, 2.0)};
    g.d_biases = {Eigen::VectorXd::Zero(1)};
    CHECK(nn::apply_gradients(net, g, opt));
    CHECK(net.weights[0](0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero gradients leave parameters unchanged") {
    for (auto mode : {nn::OptimizerMode::sgd, nn::OptimizerMode::adam}) {
        nn::Mlp net = nn::make_mlp({2, 4, 1}, nn::OutputActivation::identity, 3);
        nn::Mlp before = net;
        nn::Optimizer opt = nn::make_optimizer(mode, 0.5, net);
        nn::Gradients g;
        for (const auto& w : net.weights)
            g.d_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        for (const auto& b : net.biases)
            g.d_biases.push_back(Eigen::VectorXd::Zero(b.size()));
        CHECK(nn::apply_gradients(net, g, opt));
        for (std::size_t k = 0; k < net.weights.size(); ++k)
            CHECK(net.weights[k] == before.weights[k]);
    }
}

TEST_CASE("non-finite gradients are rejected and leave parameters intact") {
    nn::Mlp net = nn::make_mlp({2, 4, 1}, nn::OutputActivation::identity, 3);
    nn::Mlp before = net;
    nn::Optimizer opt = nn::make_optimizer(nn::OptimizerMode::adam, 0.5, net);
    nn::Gradients g;
    for (const auto& w : net.weights)
        g.d_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : net.biases)
        g.d_biases.push_back(Eigen::VectorXd::Zero(b.size()));
    g.d_weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(nn::apply_gradients(net, g, opt));
    for (std::size_t k = 0; k < net.weights.size(); ++k)
        CHECK(net.weights[k] == before.weights[k]);
    CHECK(opt.step_count == 0);
}

TEST_CASE("adam drives a quadratic loss down") {
    // Minimize (w * 1 - 3)^2 over the single weight.
    Eigen::MatrixXd w(1, 1);
    w << 0.0;
    nn::Mlp net = single_layer(w, Eigen::VectorXd::Zero(1));
    nn::Optimizer opt = nn::make_optimizer(nn::OptimizerMode::adam, 0.1, net);
    Eigen::VectorXd x(1);
    x << 1.0;
    auto loss = [&]() {
        double y = nn::forward(net, x)(0);
        return (y - 3.0) * (y - 3.0);
    };
    double initial = loss();
    for (int i = 0; i < 100; ++i) {
        nn::ForwardCache cache;
        double y = nn::forward(net, Eigen::MatrixXd(x), &cache)(0, 0);
        Eigen::MatrixXd out_grad(1, 1);
        out_grad << 2.0 * (y - 3.0);
        nn::Gradients g = nn::backward(net, cache, out_grad);
        nn::apply_gradients(net, g, opt);
    }
    CHECK(loss() < initial);
    CHECK(loss() < 0.01 * initial);
}

TEST_CASE("soft_update blends online into target") {
    nn::Mlp online = nn::make_mlp({2, 4, 1}, nn::OutputActivation::identity, 5);
    nn::Mlp target = nn::make_mlp({2, 4, 1}, nn::OutputActivation::identity, 6);

    SUBCASE("tau = 1 copies") {
        nn::soft_update(online, target, 1.0);
        for (std::size_t k = 0; k < online.weights.size(); ++k)
            CHECK(target.weights[k] == online.weights[k]);
    }
    SUBCASE("tau = 0 is a no-op") {
        nn::Mlp before = target;
        nn::soft_update(online, target, 0.0);
        for (std::size_t k = 0; k < online.weights.size(); ++k)
            CHECK(target.weights[k] == before.weights[k]);
    }
    SUBCASE("tau = 0.001 arithmetic") {
        for (auto& w : online.weights) w.setOnes();
        for (auto& b : online.biases) b.setOnes();
        for (auto& w : target.weights) w.setZero();
        for (auto& b : target.biases) b.setZero();
        nn::soft_update(online, target, 0.001);
        CHECK(target.weights[0](0, 0) == doctest::Approx(0.001).epsilon(1e-15));
    }
    SUBCASE("drift bound") {
        nn::Mlp before = target;
        const double tau = 0.001;
        nn::soft_update(online, target, tau);
        double max_drift = 0.0, max_gap = 0.0;
        for (std::size_t k = 0; k < online.weights.size(); ++k) {
            max_drift = std::max(
                max_drift,
                (target.weights[k] - before.weights[k]).cwiseAbs().maxCoeff());
            max_gap = std::max(
                max_gap,
                (online.weights[k] - before.weights[k]).cwiseAbs().maxCoeff());
        }
        CHECK(max_drift <= tau * max_gap + 1e-15);
    }
    SUBCASE("shape mismatch throws") {
        nn::Mlp small = nn::make_mlp({2, 3, 1}, nn::OutputActivation::identity, 7);
        CHECK_THROWS_AS(nn::soft_update(online, small, 0.5), std::logic_error);
    }
}

TEST_CASE("scaled tanh output stays inside its interval") {
    nn::Mlp net = nn::make_mlp({3, 16, 1}, nn::OutputActivation::scaled_tanh,
                               11, 0.0, -4.2, 0.0);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd x(3);
        x << unit(rng), unit(rng), unit(rng);
        double y = nn::forward(net, x)(0);
        CHECK(y >= -4.2);
        CHECK(y <= 0.0);
    }
}
