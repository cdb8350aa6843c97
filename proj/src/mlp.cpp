#include "safecharge/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace safecharge::nn {

std::vector<int> Mlp::layer_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(weights.size() + 1);
    sizes.push_back(input_size());
    for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
    return sizes;
}

bool Mlp::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : biases)
        if (!b.allFinite()) return false;
    return true;
}

Mlp make_mlp(const std::vector<int>& sizes, OutputActivation activation,
             std::uint64_t seed, double final_layer_scale, double out_lo,
             double out_hi) {
    if (sizes.size() < 2) throw std::logic_error("mlp needs >= 2 layer sizes");
    Mlp net;
    net.output_activation = activation;
    net.out_lo = out_lo;
    net.out_hi = out_hi;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        double bound = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
        if (k + 2 == sizes.size() && final_layer_scale > 0.0)
            bound = final_layer_scale;
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd w(sizes[k + 1], sizes[k]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
        Eigen::VectorXd b(sizes[k + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

void forward_into(const Mlp& net, const Eigen::MatrixXd& input,
                  ForwardCache& cache) {
    if (input.rows() != net.input_size())
        throw std::logic_error("forward: input dimension mismatch");
    const std::size_t layers = net.weights.size();
    cache.input = input;
    cache.pre.resize(layers);
    cache.post.resize(layers);
    const Eigen::MatrixXd* act = &cache.input;
    for (std::size_t k = 0; k < layers; ++k) {
        Eigen::MatrixXd& z = cache.pre[k];
        z.noalias() = net.weights[k] * (*act);
        z.colwise() += net.biases[k];
        Eigen::MatrixXd& out = cache.post[k];
        if (k + 1 < layers) {
            out = z.cwiseMax(0.0);  // ReLU
        } else {
            switch (net.output_activation) {
                case OutputActivation::identity:
                    out = z;
                    break;
                case OutputActivation::scaled_tanh:
                    out = ((z.array().tanh() + 1.0) *
                               (0.5 * (net.out_hi - net.out_lo)) +
                           net.out_lo)
                              .matrix();
                    break;
            }
        }
        act = &out;
    }
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
    if (cache) {
        forward_into(net, input, *cache);
        return cache->post.back();
    }
    ForwardCache local;
    forward_into(net, input, local);
    return std::move(local.post.back());
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
    return forward(net, Eigen::MatrixXd(input), nullptr).col(0);
}

bool Gradients::all_finite() const {
    for (const auto& w : d_weights)
        if (!w.allFinite()) return false;
    for (const auto& b : d_biases)
        if (!b.allFinite()) return false;
    return true;
}

void backward_into(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad, Gradients* grads,
                   Eigen::MatrixXd* input_grad, BackwardWorkspace& ws) {
    const std::size_t layers = net.weights.size();
    if (cache.pre.size() != layers || cache.post.size() != layers ||
        cache.input.rows() != net.input_size())
        throw std::logic_error("backward: cache does not match network");
    if (output_grad.rows() != net.output_size() ||
        output_grad.cols() != cache.input.cols())
        throw std::logic_error("backward: output_grad shape mismatch");

    if (grads) {
        grads->d_weights.resize(layers);
        grads->d_biases.resize(layers);
    }
    ws.delta.resize(layers);

    // Delta at the output layer.
    Eigen::MatrixXd& top = ws.delta[layers - 1];
    switch (net.output_activation) {
        case OutputActivation::identity:
            top = output_grad;
            break;
        case OutputActivation::scaled_tanh: {
            // y = lo + (hi-lo)(tanh z + 1)/2 => dy/dz = (hi-lo)/2 (1 - tanh^2 z)
            top = (output_grad.array() *
                   ((1.0 - cache.pre.back().array().tanh().square()) *
                    (0.5 * (net.out_hi - net.out_lo))))
                      .matrix();
            break;
        }
    }

    for (std::size_t k = layers; k-- > 0;) {
        const Eigen::MatrixXd& delta = ws.delta[k];
        const Eigen::MatrixXd& below =
            (k == 0) ? cache.input : cache.post[k - 1];
        if (grads) {
            grads->d_weights[k].noalias() = delta * below.transpose();
            grads->d_biases[k] = delta.rowwise().sum();
        }
        if (k > 0) {
            Eigen::MatrixXd& next = ws.delta[k - 1];
            next.noalias() = net.weights[k].transpose() * delta;
            next.array() *= (cache.pre[k - 1].array() > 0.0).cast<double>();
        } else if (input_grad) {
            input_grad->noalias() = net.weights[0].transpose() * delta;
        }
    }
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad,
                   Eigen::MatrixXd* input_grad, bool param_grads) {
    Gradients grads;
    BackwardWorkspace ws;
    backward_into(net, cache, output_grad, param_grads ? &grads : nullptr,
                  input_grad, ws);
    return grads;
}

Optimizer make_optimizer(OptimizerMode mode, double learning_rate,
                         const Mlp& net) {
    Optimizer opt;
    opt.mode = mode;
    opt.learning_rate = learning_rate;
    if (mode == OptimizerMode::adam) {
        for (const auto& w : net.weights) {
            opt.m_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
            opt.v_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : net.biases) {
            opt.m_b.push_back(Eigen::VectorXd::Zero(b.size()));
            opt.v_b.push_back(Eigen::VectorXd::Zero(b.size()));
        }
    }
    return opt;
}

namespace {

template <typename Param, typename Grad, typename Moment>
void adam_step(Param& p, const Grad& g, Moment& m, Moment& v, double lr,
               double b1, double b2, double eps, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    p.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

bool apply_gradients(Mlp& net, const Gradients& grads, Optimizer& opt) {
    if (grads.d_weights.size() != net.weights.size())
        throw std::logic_error("apply_gradients: shape mismatch");
    if (!grads.all_finite()) return false;

    if (opt.mode == OptimizerMode::sgd) {
        for (std::size_t k = 0; k < net.weights.size(); ++k) {
            net.weights[k] -= opt.learning_rate * grads.d_weights[k];
            net.biases[k] -= opt.learning_rate * grads.d_biases[k];
        }
        ++opt.step_count;
        return true;
    }

    ++opt.step_count;
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (std::size_t k = 0; k < net.weights.size(); ++k) {
        adam_step(net.weights[k], grads.d_weights[k], opt.m_w[k], opt.v_w[k],
                  opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon, bc1,
                  bc2);
        adam_step(net.biases[k], grads.d_biases[k], opt.m_b[k], opt.v_b[k],
                  opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon, bc1,
                  bc2);
    }
    return true;
}

void soft_update(const Mlp& online, Mlp& target, double tau) {
    if (online.weights.size() != target.weights.size())
        throw std::logic_error("soft_update: layer count mismatch");
    for (std::size_t k = 0; k < online.weights.size(); ++k) {
        if (online.weights[k].rows() != target.weights[k].rows() ||
            online.weights[k].cols() != target.weights[k].cols())
            throw std::logic_error("soft_update: shape mismatch");
        target.weights[k] = tau * online.weights[k] + (1.0 - tau) * target.weights[k];
        target.biases[k] = tau * online.biases[k] + (1.0 - tau) * target.biases[k];
    }
}

std::size_t parameter_count(const Mlp& net) {
    std::size_t n = 0;
    for (const auto& w : net.weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : net.biases) n += static_cast<std::size_t>(b.size());
    return n;
}

}  // namespace safecharge::nn
