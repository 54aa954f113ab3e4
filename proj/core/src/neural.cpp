#include "mulma/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mulma/errors.hpp"

namespace mulma::nn {
namespace {

void require_shape(const RMatrix& m, Index rows, Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

}  // namespace

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.spec);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size() + l.gain.size() + l.shift.size());
    }
    return n;
}

void Network::validate() const {
    if (layers.empty()) throw ConfigError("network: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        const std::string where = "network layer " + std::to_string(i);
        if (l.spec.in_dim < 1 || l.spec.out_dim < 1) throw ConfigError(where + ": dims must be >= 1");
        if (i > 0 && layers[i - 1].spec.out_dim != l.spec.in_dim) {
            throw ConfigError(where + ": input does not match previous output");
        }
        const Index bn = l.has_batchnorm() ? l.spec.out_dim : 0;
        if (l.weight.rows() != l.spec.out_dim || l.weight.cols() != l.spec.in_dim || l.bias.size() != l.spec.out_dim - bn) {
            throw ConfigError(where + ": weight/bias shape mismatch");
        }
        if (l.gain.size() != bn || l.shift.size() != bn || l.running_mean.size() != bn || l.running_var.size() != bn) {
            throw ConfigError(where + ": batch-norm state shape mismatch");
        }
        if (!l.weight.allFinite() || !l.bias.allFinite() || !l.gain.allFinite() || !l.shift.allFinite() ||
            !l.running_mean.allFinite() || !l.running_var.allFinite()) {
            throw ConfigError(where + ": non-finite parameters");
        }
        if (bn && (l.running_var.array() < 0.0).any()) throw ConfigError(where + ": negative running variance");
    }
}

std::vector<LayerSpec> mlp_specs(int in_dim, int width, int hidden_layers, int out_dim) {
    std::vector<LayerSpec> specs;
    int prev = in_dim;
    for (int i = 0; i < hidden_layers; ++i) {
        specs.push_back({LayerKind::kDenseBnRelu, prev, width});
        prev = width;
    }
    specs.push_back({LayerKind::kDense, prev, out_dim});
    return specs;
}

Network make_network(std::span<const LayerSpec> specs, Rng& rng) {
    Network net;
    std::normal_distribution<double> normal;
    for (const LayerSpec& s : specs) {
        Layer l;
        l.spec = s;
        const double scale = std::sqrt(2.0 / s.in_dim);
        l.weight = RMatrix::NullaryExpr(s.out_dim, s.in_dim, [&] { return scale * normal(rng); });
        l.bias = RVector::Zero(l.has_batchnorm() ? 0 : s.out_dim);
        if (l.has_batchnorm()) {
            l.gain = RVector::Ones(s.out_dim);
            l.shift = RVector::Zero(s.out_dim);
            l.running_mean = RVector::Zero(s.out_dim);
            l.running_var = RVector::Ones(s.out_dim);
        }
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

RMatrix forward(Network& net, const RMatrix& input, Mode mode, ForwardCache* cache) {
    if (input.rows() != net.in_dim()) throw DimensionError("forward: input has wrong feature count");
    const Index batch = input.cols();
    if (batch < 1) throw DimensionError("forward: empty batch");
    if (mode == Mode::kTrain && batch < 2) throw DimensionError("forward: train mode needs a batch of at least 2");
    if (cache) {
        cache->mode = mode;
        cache->layers.assign(net.layers.size(), {});
    }

    RMatrix act = input;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        RMatrix z = l.weight * act;
        if (l.bias.size()) z.colwise() += l.bias;
        if (cache) cache->layers[li].input = std::move(act);
        if (l.has_batchnorm()) {
            RVector mean;
            RVector inv_std;
            if (mode == Mode::kTrain) {
                mean = z.rowwise().mean();
                z.colwise() -= mean;
                const RVector var = z.array().square().rowwise().mean();
                inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
                l.running_mean = kBatchNormMomentum * l.running_mean + (1.0 - kBatchNormMomentum) * mean;
                const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
                l.running_var = kBatchNormMomentum * l.running_var + (1.0 - kBatchNormMomentum) * unbias * var;
            } else {
                z.colwise() -= l.running_mean;
                inv_std = (l.running_var.array() + kBatchNormEpsilon).rsqrt();
            }
            z = inv_std.asDiagonal() * z;
            RMatrix out = l.gain.asDiagonal() * z;
            out.colwise() += l.shift;
            out = out.cwiseMax(0.0);
            if (cache) {
                cache->layers[li].normalized = std::move(z);
                cache->layers[li].inv_std = std::move(inv_std);
            }
            act = std::move(out);
        } else {
            act = std::move(z);
        }
        if (cache) cache->layers[li].output = act;
    }
    return act;
}

RMatrix infer(const Network& net, const RMatrix& input) {
    if (input.rows() != net.in_dim()) throw DimensionError("infer: input has wrong feature count");
    RMatrix act = input;
    for (const Layer& l : net.layers) {
        RMatrix z = l.weight * act;
        if (l.bias.size()) z.colwise() += l.bias;
        if (l.has_batchnorm()) {
            const RVector scale = l.gain.array() * (l.running_var.array() + kBatchNormEpsilon).rsqrt();
            const RVector offset = l.shift.array() - scale.array() * l.running_mean.array();
            z = scale.asDiagonal() * z;
            z.colwise() += offset;
            act = z.cwiseMax(0.0);
        } else {
            act = std::move(z);
        }
    }
    return act;
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    for (const Layer& l : net.layers) {
        g.layers.push_back({RMatrix::Zero(l.weight.rows(), l.weight.cols()), RVector::Zero(l.bias.size()),
                            RVector::Zero(l.gain.size()), RVector::Zero(l.shift.size())});
    }
    return g;
}

bool Gradients::all_finite() const {
    for (const auto& l : layers)
        if (!l.weight.allFinite() || !l.bias.allFinite() || !l.gain.allFinite() || !l.shift.allFinite()) return false;
    return true;
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
        m = std::max(m, l.weight.size() ? l.weight.cwiseAbs().maxCoeff() : 0.0);
        m = std::max(m, l.bias.size() ? l.bias.cwiseAbs().maxCoeff() : 0.0);
        m = std::max(m, l.gain.size() ? l.gain.cwiseAbs().maxCoeff() : 0.0);
        m = std::max(m, l.shift.size() ? l.shift.cwiseAbs().maxCoeff() : 0.0);
    }
    return m;
}

Gradients backward(const Network& net, const ForwardCache& cache, const RMatrix& output_grad, RMatrix* input_grad) {
    if (cache.layers.size() != net.layers.size() || cache.layers.empty() || cache.layers.back().output.size() == 0) {
        throw ConfigError("backward: missing or stale forward cache");
    }
    const Index batch = cache.layers.back().output.cols();
    require_shape(output_grad, net.out_dim(), batch, "backward: output gradient");

    Gradients g;
    g.layers.resize(net.layers.size());
    RMatrix grad = output_grad;
    for (std::size_t idx = net.layers.size(); idx-- > 0;) {
        const Layer& l = net.layers[idx];
        const LayerCache& c = cache.layers[idx];
        LayerGrad& lg = g.layers[idx];
        if (c.input.cols() != batch) throw ConfigError("backward: missing or stale forward cache");
        if (l.has_batchnorm()) {
            RMatrix da = (c.output.array() > 0.0).select(grad, 0.0);
            lg.gain = (da.cwiseProduct(c.normalized)).rowwise().sum();
            lg.shift = da.rowwise().sum();
            RMatrix dxhat = l.gain.asDiagonal() * da;
            if (cache.mode == Mode::kTrain) {
                const RVector sum_d = dxhat.rowwise().sum();
                const RVector sum_dx = dxhat.cwiseProduct(c.normalized).rowwise().sum();
                const double b = static_cast<double>(batch);
                RMatrix dz = b * dxhat;
                dz.colwise() -= sum_d;
                dz -= sum_dx.asDiagonal() * c.normalized;
                grad = (c.inv_std / b).asDiagonal() * dz;
            } else {
                grad = c.inv_std.asDiagonal() * dxhat;
            }
        }
        lg.weight = grad * c.input.transpose();
        lg.bias = l.has_batchnorm() ? RVector() : RVector(grad.rowwise().sum());
        if (idx > 0 || input_grad) grad = l.weight.transpose() * grad;
    }
    if (input_grad) *input_grad = std::move(grad);
    return g;
}

double huber(double pred, double target) {
    const double e = std::abs(target - pred);
    return e <= 1.0 ? 0.5 * e * e : e - 0.5;
}

double huber_derivative(double pred, double target) {
    const double e = pred - target;
    return std::clamp(e, -1.0, 1.0);
}

LossGrad huber_mean(const RMatrix& pred, const RMatrix& target) {
    require_shape(target, pred.rows(), pred.cols(), "huber_mean: target");
    const double count = static_cast<double>(pred.size());
    LossGrad out;
    out.grad.resize(pred.rows(), pred.cols());
    double total = 0.0;
    for (Index j = 0; j < pred.cols(); ++j) {
        for (Index i = 0; i < pred.rows(); ++i) {
            total += huber(pred(i, j), target(i, j));
            out.grad(i, j) = huber_derivative(pred(i, j), target(i, j)) / count;
        }
    }
    out.loss = total / count;
    return out;
}

WeightedLossState WeightedLossState::uniform(int users) {
    if (users < 1) throw ConfigError("weighted loss: need at least one user");
    return {RVector::Constant(users, 1.0 / users)};
}

void WeightedLossState::validate() const {
    if (weights.size() < 1) throw ConfigError("weighted loss: empty weights");
    if ((weights.array() < 0.0).any() || !weights.allFinite()) throw ConfigError("weighted loss: invalid weights");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw ConfigError("weighted loss: weights must sum to 1");
}

WeightedLoss weighted_loss(std::span<const double> losses, const WeightedLossState& state) {
    if (static_cast<Index>(losses.size()) != state.weights.size()) {
        throw DimensionError("weighted_loss: one loss per user required");
    }
    const Eigen::Map<const RVector> loss(losses.data(), static_cast<Index>(losses.size()));
    if ((loss.array() < 0.0).any() || !loss.allFinite()) throw ConfigError("weighted_loss: losses must be finite and >= 0");
    WeightedLoss out;
    out.value = state.weights.dot(loss);
    const double total = loss.sum();
    if (total == 0.0) {
        out.next = state;
        return out;
    }
    // (loss / value) renormalised to unit sum reduces to loss / sum(loss).
    out.next.weights = loss / total;
    return out;
}

AdamState AdamState::for_network(const Network& net, AdamConfig config) {
    return {config, Gradients::zeros_like(net), Gradients::zeros_like(net), 0};
}

namespace {

template <typename P, typename G>
void adam_update(P& param, const G& grad, P& m, P& v, const AdamConfig& c, double corr1, double corr2) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -= c.learning_rate * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.epsilon);
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
    if (grads.layers.size() != net.layers.size() || state.first_moment.layers.size() != net.layers.size()) {
        throw DimensionError("adam_step: gradient/state shape mismatch");
    }
    if (!grads.all_finite()) throw TrainingError("adam_step: non-finite gradient", -1);
    ++state.step;
    const AdamConfig& c = state.config;
    const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        const LayerGrad& g = grads.layers[i];
        LayerGrad& m = state.first_moment.layers[i];
        LayerGrad& v = state.second_moment.layers[i];
        if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() || g.gain.size() != l.gain.size()) {
            throw DimensionError("adam_step: gradient shape mismatch");
        }
        adam_update(l.weight, g.weight, m.weight, v.weight, c, corr1, corr2);
        adam_update(l.bias, g.bias, m.bias, v.bias, c, corr1, corr2);
        if (l.has_batchnorm()) {
            adam_update(l.gain, g.gain, m.gain, v.gain, c, corr1, corr2);
            adam_update(l.shift, g.shift, m.shift, v.shift, c, corr1, corr2);
        }
    }
}

void for_each_parameter(Network& net, Gradients& grads, const std::function<void(double&, double&)>& fn) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        LayerGrad& g = grads.layers[i];
        for (Index k = 0; k < l.weight.size(); ++k) fn(l.weight.data()[k], g.weight.data()[k]);
        for (Index k = 0; k < l.bias.size(); ++k) fn(l.bias(k), g.bias(k));
        for (Index k = 0; k < l.gain.size(); ++k) fn(l.gain(k), g.gain(k));
        for (Index k = 0; k < l.shift.size(); ++k) fn(l.shift(k), g.shift(k));
    }
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double grad_check(const Network& net, const RMatrix& input, const RMatrix& target, double eps) {
    Network work = net;
    ForwardCache cache;
    const RMatrix out = forward(work, input, Mode::kTrain, &cache);
    Gradients analytic = backward(work, cache, huber_mean(out, target).grad);

    auto loss_of = [&](Network& n) { return huber_mean(forward(n, input, Mode::kTrain), target).loss; };
    double worst = 0.0;
    for_each_parameter(work, analytic, [&](double& p, double& g) {
        const double saved = p;
        p = saved + eps;
        const double up = loss_of(work);
        p = saved - eps;
        const double down = loss_of(work);
        p = saved;
        worst = std::max(worst, relative_error(g, (up - down) / (2.0 * eps)));
    });
    return worst;
}

}  // namespace mulma::nn
