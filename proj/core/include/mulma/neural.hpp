#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mulma/numerics.hpp"
#include "mulma/rng.hpp"

/// Minimal feed-forward network engine: dense layers, batch normalisation,
/// ReLU, Huber loss, loss re-weighting across users, and Adam.
///
/// Activations are stored feature-major: a batch is a (features x samples) matrix.
namespace mulma::nn {

enum class LayerKind {
    kDense,         // W r + b
    kDenseBnRelu,   // relu(batchnorm(W r))
};

struct LayerSpec {
    LayerKind kind = LayerKind::kDense;
    int in_dim = 1;
    int out_dim = 1;

    bool operator==(const LayerSpec&) const = default;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct Layer {
    LayerSpec spec;
    RMatrix weight;  // out x in
    RVector bias;    // empty for batch-norm layers, whose shift absorbs it
    // Batch-norm state; empty for plain dense layers.
    RVector gain;
    RVector shift;
    RVector running_mean;
    RVector running_var;

    bool has_batchnorm() const { return spec.kind == LayerKind::kDenseBnRelu; }
};

struct Network {
    std::vector<Layer> layers;

    int in_dim() const { return layers.front().spec.in_dim; }
    int out_dim() const { return layers.back().spec.out_dim; }
    std::vector<LayerSpec> specs() const;
    /// Trainable scalars (weights, biases, batch-norm gain and shift).
    std::size_t parameter_count() const;
    /// Throws ConfigError when shapes disagree with the specs or values are non-finite.
    void validate() const;
};

/// Hidden layers of `width` (dense + batchnorm + relu) followed by an affine output layer.
std::vector<LayerSpec> mlp_specs(int in_dim, int width, int hidden_layers, int out_dim);

/// He-scaled Gaussian weights, zero biases, unit gain, zero shift, unit running variance.
Network make_network(std::span<const LayerSpec> specs, Rng& rng);

enum class Mode { kTrain, kInfer };

struct LayerCache {
    RMatrix input;       // in x B
    RMatrix normalized;  // batch-normalised pre-activation (x-hat), BN layers only
    RVector inv_std;     // 1 / sqrt(var + eps) used for normalisation
    RMatrix output;      // layer output (after relu for BN layers)
};

struct ForwardCache {
    Mode mode = Mode::kInfer;
    std::vector<LayerCache> layers;
};

/// Runs the network on a (in_dim x B) batch. Train mode normalises with batch
/// statistics (needs B >= 2) and updates the running statistics; infer mode uses
/// the running statistics. Fills `cache` for a later backward pass when given.
RMatrix forward(Network& net, const RMatrix& input, Mode mode, ForwardCache* cache = nullptr);

/// Infer-mode forward pass; leaves the network untouched.
RMatrix infer(const Network& net, const RMatrix& input);

struct LayerGrad {
    RMatrix weight;
    RVector bias;
    RVector gain;
    RVector shift;
};

struct Gradients {
    std::vector<LayerGrad> layers;

    static Gradients zeros_like(const Network& net);
    bool all_finite() const;
    double max_abs() const;
};

/// Back-propagates d(loss)/d(output) through a cached forward pass. Writes
/// d(loss)/d(input) to `input_grad` when given.
Gradients backward(const Network& net, const ForwardCache& cache, const RMatrix& output_grad,
                   RMatrix* input_grad = nullptr);

/// 0.5 e^2 for |e| <= 1, |e| - 0.5 otherwise, with e = target - pred.
double huber(double pred, double target);
/// d huber / d pred.
double huber_derivative(double pred, double target);

struct LossGrad {
    double loss = 0.0;
    RMatrix grad;  // d loss / d pred
};

/// Mean Huber loss over every entry of the batch.
LossGrad huber_mean(const RMatrix& pred, const RMatrix& target);

/// Per-user loss weights; non-negative and summing to one.
struct WeightedLossState {
    RVector weights;

    static WeightedLossState uniform(int users);
    void validate() const;
};

struct WeightedLoss {
    double value = 0.0;
    WeightedLossState next;
};

/// value = w . losses. The next weights are losses / value renormalised to sum
/// to one, so users with larger loss receive larger weight. All-zero losses keep
/// the weights unchanged.
WeightedLoss weighted_loss(std::span<const double> losses, const WeightedLossState& state);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    Gradients first_moment;
    Gradients second_moment;
    std::int64_t step = 0;

    static AdamState for_network(const Network& net, AdamConfig config = {});
};

/// One bias-corrected Adam update. Throws TrainingError on a non-finite gradient.
void adam_step(Network& net, const Gradients& grads, AdamState& state);

/// Applies `fn(parameter, gradient)` to every trainable scalar in a fixed order.
void for_each_parameter(Network& net, Gradients& grads, const std::function<void(double&, double&)>& fn);

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double relative_error(double analytic, double numeric);

/// Max relative error between backprop and central differences of the train-mode
/// mean Huber loss of `net` on (input, target). The network is not modified.
double grad_check(const Network& net, const RMatrix& input, const RMatrix& target, double eps = 1e-5);

}  // namespace mulma::nn
