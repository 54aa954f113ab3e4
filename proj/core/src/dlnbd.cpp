#include "mulma/dlnbd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "mulma/errors.hpp"
#include "mulma/link.hpp"

namespace mulma {

std::string_view to_string(DlVariant v) { return v == DlVariant::kDlNbd ? "FAS-DL-NBD" : "FAS-E2E"; }

int DlArchitecture::total_bits() const { return std::accumulate(bits.begin(), bits.end(), 0); }

std::vector<nn::LayerSpec> DlArchitecture::encoder_specs(int k) const {
    return nn::mlp_specs(bits.at(k), width, encoder_hidden, 2 * bits.at(k));
}

std::vector<nn::LayerSpec> DlArchitecture::decoder_specs(int k) const {
    return nn::mlp_specs(2 * rx.at(k), width, decoder_hidden, bits.at(k));
}

std::vector<nn::LayerSpec> DlArchitecture::transmitter_specs() const {
    const int n = total_bits();
    std::vector<nn::LayerSpec> specs{{nn::LayerKind::kDenseBnRelu, n, 2 * n}};
    const auto rest = nn::mlp_specs(2 * n, width, encoder_hidden, 2 * n_tx);
    specs.insert(specs.end(), rest.begin(), rest.end());
    return specs;
}

void DlArchitecture::validate() const {
    if (n_tx < 1) throw ConfigError("architecture: n_tx must be >= 1");
    if (bits.empty() || bits.size() != rx.size()) throw ConfigError("architecture: need n_k and N_Rk for every user");
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] < 1 || rx[k] < 1) throw ConfigError("architecture: n_k and N_Rk must be >= 1");
    }
    if (width < 1 || encoder_hidden < 0 || decoder_hidden < 0) throw ConfigError("architecture: bad layer sizes");
}

TrainParams TrainParams::preset(const std::string& set_id) {
    TrainParams p;
    p.set_id = set_id;
    if (set_id == "I") {
        p.users = 2;
        p.samples = 1000;
        p.epochs = 200;
    } else if (set_id == "II") {
        p.users = 3;
        p.samples = 10000;
        p.epochs = 300;
    } else if (set_id == "III") {
        p.users = 4;
        p.samples = 10000;
        p.epochs = 300;
    } else if (set_id == "IV") {
        p.users = 2;
        p.samples = 10000;
        p.epochs = 400;
    } else {
        throw ConfigError("unknown training set '" + set_id + "' (expected I, II, III or IV)");
    }
    return p;
}

void TrainParams::validate() const {
    if (users < 1 || width < 1 || encoder_hidden < 0 || decoder_hidden < 0) {
        throw ConfigError("train: users, width and layer counts must be positive");
    }
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (samples < 2) throw ConfigError("train: samples must be >= 2");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (!(snr_min_db <= snr_max_db) || !std::isfinite(snr_min_db) || !std::isfinite(snr_max_db)) {
        throw ConfigError("train: SNR range must be finite and non-empty");
    }
}

DlArchitecture make_architecture(DlVariant variant, const ChannelConfig& config, std::span<const int> bits,
                                 const TrainParams& params) {
    DlArchitecture a;
    a.variant = variant;
    a.n_tx = config.n_tx;
    a.rx = config.users;
    a.bits.assign(bits.begin(), bits.end());
    a.width = params.width;
    a.encoder_hidden = params.encoder_hidden;
    a.decoder_hidden = params.decoder_hidden;
    a.validate();
    return a;
}

std::uint64_t fingerprint(std::span<const CMatrix> matrices) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    for (const CMatrix& m : matrices) {
        const std::int64_t dims[2] = {m.rows(), m.cols()};
        mix(dims, sizeof dims);
        mix(m.data(), sizeof(cd) * static_cast<std::size_t>(m.size()));
    }
    return h;
}

std::vector<RMatrix> channel_embedding(const ChannelRealization& channel) {
    std::vector<RMatrix> out;
    for (const CMatrix& h : channel.h) out.push_back(real_embedding(h));
    return out;
}

DlSystem build(const DlArchitecture& arch, const ChannelRealization& channel, const PrecoderSet* precoders,
               double p_t, std::uint64_t seed, double learning_rate) {
    arch.validate();
    if (!(p_t > 0.0)) throw ConfigError("build: p_t must be positive");
    const int users = arch.user_count();
    if (channel.user_count() != users) throw DimensionError("build: channel and architecture user counts differ");
    for (int k = 0; k < users; ++k) {
        if (channel.h[k].rows() != arch.rx[k] || channel.h[k].cols() != arch.n_tx) {
            throw DimensionError("build: channel of user " + std::to_string(k) + " does not match the architecture");
        }
    }
    if (arch.variant == DlVariant::kDlNbd) {
        if (!precoders) throw ConfigError("build: FAS-DL-NBD needs a precoder set");
        if (precoders->user_count() != users) throw DimensionError("build: precoder user count mismatch");
        for (int k = 0; k < users; ++k) {
            if (precoders->blocks[k].rows() != arch.n_tx || precoders->blocks[k].cols() != arch.bits[k]) {
                throw DimensionError("build: precoder of user " + std::to_string(k) + " does not match the architecture");
            }
        }
    } else if (precoders) {
        throw ConfigError("build: FAS-E2E takes no precoder set");
    }

    DlSystem sys;
    sys.arch = arch;
    sys.p_t = p_t;
    sys.channel = channel_embedding(channel);
    sys.channel_fingerprint = fingerprint(channel.h);
    const nn::AdamConfig adam{learning_rate};
    if (arch.variant == DlVariant::kDlNbd) {
        sys.precoder_fingerprint = fingerprint(precoders->blocks);
        for (int k = 0; k < users; ++k) {
            sys.precoder.push_back(real_embedding(precoders->blocks[k]));
            Rng rng = make_rng(seed, {stream::kNetwork, 0, static_cast<std::uint64_t>(k)});
            sys.encoders.push_back(nn::make_network(arch.encoder_specs(k), rng));
            sys.encoder_opt.push_back(nn::AdamState::for_network(sys.encoders.back(), adam));
        }
    } else {
        Rng rng = make_rng(seed, {stream::kNetwork, 2});
        sys.transmitter = nn::make_network(arch.transmitter_specs(), rng);
        sys.transmitter_opt.push_back(nn::AdamState::for_network(sys.transmitter, adam));
    }
    for (int k = 0; k < users; ++k) {
        Rng rng = make_rng(seed, {stream::kNetwork, 1, static_cast<std::uint64_t>(k)});
        sys.decoders.push_back(nn::make_network(arch.decoder_specs(k), rng));
        sys.decoder_opt.push_back(nn::AdamState::for_network(sys.decoders.back(), adam));
    }
    sys.loss_weights = nn::WeightedLossState::uniform(users);
    return sys;
}

RMatrix centre_bits(std::span<const Bits> frames) {
    if (frames.empty()) throw DimensionError("centre_bits: no frames");
    const Index n = static_cast<Index>(frames.front().size());
    RMatrix out(n, static_cast<Index>(frames.size()));
    for (Index j = 0; j < out.cols(); ++j) {
        if (static_cast<Index>(frames[j].size()) != n) throw DimensionError("centre_bits: ragged frames");
        for (Index i = 0; i < n; ++i) out(i, j) = frames[j][i] ? 0.5 : -0.5;
    }
    return out;
}

std::vector<RMatrix> draw_noise(const DlArchitecture& arch, Index batch, double variance, Rng& rng) {
    std::vector<RMatrix> out;
    std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
    for (int nr : arch.rx) {
        out.push_back(variance > 0.0 ? RMatrix(RMatrix::NullaryExpr(2 * nr, batch, [&] { return normal(rng); }))
                                     : RMatrix(RMatrix::Zero(2 * nr, batch)));
    }
    return out;
}

namespace {

enum class Net { kEncoder, kDecoder, kTransmitter };

void check_link_inputs(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                       std::span<const RMatrix> channel) {
    const int users = sys.arch.user_count();
    if (static_cast<int>(bits.size()) != users || static_cast<int>(noise.size()) != users) {
        throw DimensionError("link: need bits and noise for every user");
    }
    const Index batch = bits[0].cols();
    for (int k = 0; k < users; ++k) {
        if (bits[k].rows() != sys.arch.bits[k] || bits[k].cols() != batch) {
            throw DimensionError("link: bits of user " + std::to_string(k) + " have the wrong shape");
        }
        if (noise[k].rows() != 2 * sys.arch.rx[k] || noise[k].cols() != batch) {
            throw DimensionError("link: noise of user " + std::to_string(k) + " has the wrong shape");
        }
        if (!channel.empty() && (channel[k].rows() != sys.channel[k].rows() || channel[k].cols() != sys.channel[k].cols())) {
            throw DimensionError("link: channel override of user " + std::to_string(k) + " has the wrong shape");
        }
    }
    if (!channel.empty() && static_cast<int>(channel.size()) != users) {
        throw DimensionError("link: channel override needs every user");
    }
}

template <typename Run>
LinkOutput run_link(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                    std::span<const RMatrix> channel, LinkCache* cache, Run&& run) {
    check_link_inputs(sys, bits, noise, channel);
    const int users = sys.arch.user_count();
    const Index batch = bits[0].cols();
    RMatrix v = RMatrix::Zero(2 * sys.arch.n_tx, batch);
    if (sys.arch.variant == DlVariant::kDlNbd) {
        for (int k = 0; k < users; ++k) v.noalias() += sys.precoder[k] * run(Net::kEncoder, k, bits[k]);
    } else {
        RMatrix all(sys.arch.total_bits(), batch);
        Index row = 0;
        for (int k = 0; k < users; ++k) {
            all.middleRows(row, bits[k].rows()) = bits[k];
            row += bits[k].rows();
        }
        v = run(Net::kTransmitter, 0, all);
    }
    const RVector norms = v.colwise().norm().transpose();
    if ((norms.array() < 1e-12).any() || !norms.allFinite()) {
        throw NumericalError("link: encoded signal has (near-)zero norm, cannot normalise");
    }
    LinkOutput out;
    out.x = v * (std::sqrt(sys.p_t) * norms.cwiseInverse()).asDiagonal();
    for (int k = 0; k < users; ++k) {
        const RMatrix& h = channel.empty() ? sys.channel[k] : channel[k];
        out.received.push_back(h * out.x + noise[k]);
        out.predictions.push_back(run(Net::kDecoder, k, out.received.back()));
    }
    if (cache) {
        cache->v = std::move(v);
        cache->norms = norms;
        cache->x = out.x;
    }
    return out;
}

}  // namespace

LinkOutput forward_link(DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise, nn::Mode mode,
                        LinkCache* cache, std::span<const RMatrix> channel) {
    if (cache) {
        cache->encoders.assign(sys.encoders.size(), {});
        cache->decoders.assign(sys.decoders.size(), {});
        cache->transmitter = {};
    }
    return run_link(sys, bits, noise, channel, cache, [&](Net net, int k, const RMatrix& in) {
        switch (net) {
            case Net::kEncoder:
                return nn::forward(sys.encoders[k], in, mode, cache ? &cache->encoders[k] : nullptr);
            case Net::kDecoder:
                return nn::forward(sys.decoders[k], in, mode, cache ? &cache->decoders[k] : nullptr);
            default:
                return nn::forward(sys.transmitter, in, mode, cache ? &cache->transmitter : nullptr);
        }
    });
}

LinkOutput infer_link(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                      std::span<const RMatrix> channel) {
    return run_link(sys, bits, noise, channel, nullptr, [&](Net net, int k, const RMatrix& in) {
        switch (net) {
            case Net::kEncoder:
                return nn::infer(sys.encoders[k], in);
            case Net::kDecoder:
                return nn::infer(sys.decoders[k], in);
            default:
                return nn::infer(sys.transmitter, in);
        }
    });
}

LinkGradients backward_link(const DlSystem& sys, const LinkCache& cache, std::span<const RMatrix> prediction_grads) {
    const int users = sys.arch.user_count();
    if (static_cast<int>(prediction_grads.size()) != users || static_cast<int>(cache.decoders.size()) != users ||
        cache.x.size() == 0) {
        throw ConfigError("backward_link: missing or stale link cache");
    }
    LinkGradients g;
    RMatrix dx = RMatrix::Zero(cache.x.rows(), cache.x.cols());
    for (int k = 0; k < users; ++k) {
        RMatrix dy;
        g.decoders.push_back(nn::backward(sys.decoders[k], cache.decoders[k], prediction_grads[k], &dy));
        const RMatrix& h = sys.channel[k];
        dx.noalias() += h.transpose() * dy;
    }
    // x = c v / |v|  =>  dv = (c / |v|) (dx - xh (xh . dx)), xh = v / |v|.
    const double c = std::sqrt(sys.p_t);
    const RMatrix xh = cache.x / c;
    const RVector proj = xh.cwiseProduct(dx).colwise().sum().transpose();
    RMatrix dv = dx - xh * proj.asDiagonal();
    dv = dv * (c * cache.norms.cwiseInverse()).asDiagonal();
    if (sys.arch.variant == DlVariant::kDlNbd) {
        for (int k = 0; k < users; ++k) {
            g.encoders.push_back(nn::backward(sys.encoders[k], cache.encoders[k], sys.precoder[k].transpose() * dv));
        }
    } else {
        g.transmitter = nn::backward(sys.transmitter, cache.transmitter, dv);
    }
    return g;
}

LinkLoss link_loss(const LinkOutput& out, std::span<const RMatrix> bits, const nn::WeightedLossState& weights) {
    const std::size_t users = out.predictions.size();
    if (bits.size() != users || static_cast<std::size_t>(weights.weights.size()) != users) {
        throw DimensionError("link_loss: need bits and a weight for every user");
    }
    LinkLoss l;
    for (std::size_t k = 0; k < users; ++k) {
        nn::LossGrad lg = nn::huber_mean(out.predictions[k], bits[k]);
        l.per_user.push_back(lg.loss);
        l.prediction_grads.push_back(weights.weights(static_cast<Index>(k)) * lg.grad);
    }
    const nn::WeightedLoss wl = nn::weighted_loss(l.per_user, weights);
    l.value = wl.value;
    l.next = wl.next;
    return l;
}

namespace {

template <typename Sys, typename Grads, typename F>
void for_each_network(Sys& sys, Grads& g, F&& f) {
    for (std::size_t k = 0; k < g.encoders.size(); ++k) f(sys.encoders[k], g.encoders[k]);
    for (std::size_t k = 0; k < g.decoders.size(); ++k) f(sys.decoders[k], g.decoders[k]);
    if (!g.transmitter.layers.empty()) f(sys.transmitter, g.transmitter);
}

}  // namespace

double link_grad_check(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                       double eps) {
    DlSystem work = sys;
    LinkCache cache;
    const LinkOutput out = forward_link(work, bits, noise, nn::Mode::kTrain, &cache);
    LinkGradients analytic = backward_link(work, cache, link_loss(out, bits, work.loss_weights).prediction_grads);

    auto loss_of = [&] {
        return link_loss(forward_link(work, bits, noise, nn::Mode::kTrain), bits, work.loss_weights).value;
    };
    double worst = 0.0;
    for_each_network(work, analytic, [&](nn::Network& net, nn::Gradients& grads) {
        nn::for_each_parameter(net, grads, [&](double& p, double& g) {
            const double saved = p;
            p = saved + eps;
            const double up = loss_of();
            p = saved - eps;
            const double down = loss_of();
            p = saved;
            worst = std::max(worst, nn::relative_error(g, (up - down) / (2.0 * eps)));
        });
    });
    return worst;
}

std::vector<RMatrix> make_training_data(std::span<const int> bits, int samples, std::uint64_t seed) {
    std::vector<RMatrix> out;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        Rng rng = make_rng(seed, {stream::kTraining, 1, static_cast<std::uint64_t>(k)});
        std::bernoulli_distribution coin;
        out.push_back(RMatrix::NullaryExpr(bits[k], samples, [&] { return coin(rng) ? 0.5 : -0.5; }));
    }
    return out;
}

TrainReport train(DlSystem& sys, const TrainParams& params, std::span<const RMatrix> data,
                  const EpochCallback& on_epoch) {
    params.validate();
    const int users = sys.arch.user_count();
    if (static_cast<int>(data.size()) != users) throw DimensionError("train: need training bits for every user");
    const Index samples = data[0].cols();
    for (int k = 0; k < users; ++k) {
        if (data[k].rows() != sys.arch.bits[k] || data[k].cols() != samples) {
            throw DimensionError("train: training bits of user " + std::to_string(k) + " have the wrong shape");
        }
    }
    if (samples < 2) throw DimensionError("train: need at least 2 samples");
    for (auto* opts : {&sys.encoder_opt, &sys.decoder_opt, &sys.transmitter_opt}) {
        for (auto& o : *opts) o.config.learning_rate = params.learning_rate;
    }

    const Index batch = std::min<Index>(params.batch_size, samples);
    const Index steps = samples / batch;
    Rng rng = make_rng(params.seed, {stream::kTraining, 0});
    std::uniform_real_distribution<double> snr_draw(params.snr_min_db, params.snr_max_db);
    std::vector<Index> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), Index{0});

    TrainReport report;
    std::vector<RMatrix> batch_bits(users);
    LinkCache cache;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::vector<double> user_total(users, 0.0);
        for (Index s = 0; s < steps; ++s) {
            const std::vector<Index> idx(order.begin() + s * batch, order.begin() + (s + 1) * batch);
            for (int k = 0; k < users; ++k) batch_bits[k] = data[k](Eigen::all, idx);
            const double snr = params.snr_min_db == params.snr_max_db ? params.snr_min_db : snr_draw(rng);
            const std::vector<RMatrix> noise = draw_noise(sys.arch, batch, noise_variance(snr), rng);

            const LinkOutput out = forward_link(sys, batch_bits, noise, nn::Mode::kTrain, &cache);
            const LinkLoss loss = link_loss(out, batch_bits, sys.loss_weights);
            if (!std::isfinite(loss.value)) throw TrainingError("train: non-finite loss", epoch);
            const LinkGradients grads = backward_link(sys, cache, loss.prediction_grads);
            try {
                for (int k = 0; k < users; ++k) nn::adam_step(sys.decoders[k], grads.decoders[k], sys.decoder_opt[k]);
                for (std::size_t k = 0; k < grads.encoders.size(); ++k) {
                    nn::adam_step(sys.encoders[k], grads.encoders[k], sys.encoder_opt[k]);
                }
                if (!grads.transmitter.layers.empty()) {
                    nn::adam_step(sys.transmitter, grads.transmitter, sys.transmitter_opt.at(0));
                }
            } catch (const TrainingError&) {
                throw TrainingError("train: non-finite gradient", epoch);
            }
            total += loss.value;
            for (int k = 0; k < users; ++k) user_total[k] += loss.per_user[k];
            if (!params.per_epoch_weights) sys.loss_weights = loss.next;
        }
        if (params.per_epoch_weights) {
            for (double& u : user_total) u /= static_cast<double>(steps);
            sys.loss_weights = nn::weighted_loss(user_total, sys.loss_weights).next;
        }
        const double mean = total / static_cast<double>(steps);
        report.epoch_loss.push_back(mean);
        report.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (on_epoch) on_epoch(epoch, mean);
    }
    report.final_weights = sys.loss_weights;
    return report;
}

std::vector<Bits> decide(const RMatrix& predictions) {
    std::vector<Bits> out(static_cast<std::size_t>(predictions.cols()), Bits(predictions.rows()));
    for (Index j = 0; j < predictions.cols(); ++j)
        for (Index i = 0; i < predictions.rows(); ++i) out[j][i] = predictions(i, j) >= 0.0 ? 1 : 0;
    return out;
}

std::uint64_t count_errors(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                           std::span<const RMatrix> channel) {
    const LinkOutput out = infer_link(sys, bits, noise, channel);
    std::uint64_t errors = 0;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        errors += static_cast<std::uint64_t>(
            ((out.predictions[k].array() >= 0.0) != (bits[k].array() > 0.0)).count());
    }
    return errors;
}

BerCurve evaluate(const DlSystem& sys, std::span<const double> snr_db, int n_frames, std::uint64_t seed,
                  const ChannelRealization* true_channel) {
    if (n_frames < 1) throw ConfigError("evaluate: n_frames must be >= 1");
    std::vector<RMatrix> channel;
    if (true_channel) channel = channel_embedding(*true_channel);
    constexpr int kChunk = 1000;
    BerCurve curve;
    for (std::size_t i = 0; i < snr_db.size(); ++i) {
        BerPoint point{snr_db[i], 0, 0};
        Rng noise_rng = make_rng(seed, {stream::kNoise, i});
        for (int done = 0; done < n_frames; done += kChunk) {
            const int b = std::min(kChunk, n_frames - done);
            const std::vector<RMatrix> bits =
                make_training_data(sys.arch.bits, b, derive_seed(seed, {stream::kBits, i, static_cast<std::uint64_t>(done)}));
            const std::vector<RMatrix> noise = draw_noise(sys.arch, b, noise_variance(snr_db[i]), noise_rng);
            point.errors += count_errors(sys, bits, noise, channel);
            point.bits += static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(sys.arch.total_bits());
        }
        curve.points.push_back(point);
    }
    return curve;
}

}  // namespace mulma
