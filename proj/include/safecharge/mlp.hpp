#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace safecharge::nn {

enum class OutputActivation { identity, scaled_tanh };

/// Fully connected ReLU network. weights[k] has shape
/// (layer_sizes[k+1] x layer_sizes[k]); inputs and activations are stored as
/// columns so a whole minibatch flows through as one matrix product.
struct Mlp {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    OutputActivation output_activation = OutputActivation::identity;
    double out_lo = -1.0;  // scaled_tanh range
    double out_hi = 1.0;

    std::vector<int> layer_sizes() const;
    int input_size() const { return static_cast<int>(weights.front().cols()); }
    int output_size() const { return static_cast<int>(weights.back().rows()); }
    bool all_finite() const;
};

/// Uniform init in +-1/sqrt(fan_in) per layer; the output layer uses
/// +-final_layer_scale instead when final_layer_scale > 0.
Mlp make_mlp(const std::vector<int>& sizes, OutputActivation activation,
             std::uint64_t seed, double final_layer_scale = 0.0,
             double out_lo = -1.0, double out_hi = 1.0);

struct ForwardCache {
    Eigen::MatrixXd input;               // (in x batch)
    std::vector<Eigen::MatrixXd> pre;    // pre-activations per layer
    std::vector<Eigen::MatrixXd> post;   // activations per layer
};

/// Forward pass for a batch stored column-wise, writing into the cache.
/// After the first call with a given shape the buffers are reused, so the
/// warm path performs no allocation. The output is cache.post.back().
void forward_into(const Mlp& net, const Eigen::MatrixXd& input,
                  ForwardCache& cache);

/// Forward pass for a batch stored column-wise. When cache is non-null it is
/// filled for a later backward() call.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

/// Single-sample convenience wrapper.
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);

struct Gradients {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
    bool all_finite() const;
};

/// Scratch space for backward passes; reused across calls.
struct BackwardWorkspace {
    std::vector<Eigen::MatrixXd> delta;
};

/// Backpropagates dLoss/dOutput (out x batch) using caller-owned buffers.
/// Gradients are summed over the batch; pass grads = nullptr to skip the
/// weight/bias products when only the input gradient is needed. input_grad,
/// when non-null, receives dLoss/dInput (in x batch). Throws
/// std::logic_error when the cache does not match the network.
void backward_into(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad, Gradients* grads,
                   Eigen::MatrixXd* input_grad, BackwardWorkspace& ws);

/// Allocating convenience wrapper around backward_into().
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad,
                   Eigen::MatrixXd* input_grad = nullptr,
                   bool param_grads = true);

enum class OptimizerMode { sgd, adam };

struct Optimizer {
    OptimizerMode mode = OptimizerMode::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
};

Optimizer make_optimizer(OptimizerMode mode, double learning_rate,
                         const Mlp& net);

/// One optimizer step. Returns false (and leaves everything untouched) when
/// any gradient entry is non-finite.
bool apply_gradients(Mlp& net, const Gradients& grads, Optimizer& opt);

/// target <- tau * online + (1 - tau) * target, elementwise.
/// Throws std::logic_error on shape mismatch.
void soft_update(const Mlp& online, Mlp& target, double tau);

std::size_t parameter_count(const Mlp& net);

}  // namespace safecharge::nn
