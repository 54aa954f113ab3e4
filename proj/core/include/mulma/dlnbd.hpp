#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mulma/ber.hpp"
#include "mulma/channel.hpp"
#include "mulma/codebook.hpp"
#include "mulma/neural.hpp"
#include "mulma/precoding.hpp"

/// Learned transmit/receive chains wrapped around the block-diagonalising
/// precoder (DL-NBD) or replacing it entirely (E2E).
///
/// Bits enter the networks zero-centred ({0,1} -> {-0.5,+0.5}). Complex vectors
/// are carried as [real parts; imaginary parts].
namespace mulma {

enum class DlVariant { kDlNbd, kE2e };
std::string_view to_string(DlVariant v);

struct DlArchitecture {
    DlVariant variant = DlVariant::kDlNbd;
    int n_tx = 1;
    std::vector<int> rx;    // N_Rk
    std::vector<int> bits;  // n_k
    int width = 128;        // N_h
    int encoder_hidden = 3; // H_E
    int decoder_hidden = 2; // H_D

    int user_count() const { return static_cast<int>(bits.size()); }
    int total_bits() const;
    /// n_k -> H_E x N_h -> 2 n_k
    std::vector<nn::LayerSpec> encoder_specs(int k) const;
    /// 2 N_Rk -> H_D x N_h -> n_k
    std::vector<nn::LayerSpec> decoder_specs(int k) const;
    /// N -> 2N -> H_E x N_h -> 2 N_T
    std::vector<nn::LayerSpec> transmitter_specs() const;
    void validate() const;
};

/// One of the four shipped training presets, or a custom set.
struct TrainParams {
    std::string set_id = "custom";
    int users = 2;
    int width = 128;
    int encoder_hidden = 3;
    int decoder_hidden = 2;
    int batch_size = 100;
    int samples = 1000;
    int epochs = 200;
    double learning_rate = 1e-3;
    double snr_min_db = 0.0;
    double snr_max_db = 15.0;
    bool per_epoch_weights = false;
    std::uint64_t seed = 0;

    /// "I".."IV": K = 2, 3, 4, 2; |T| = 1e3, 1e4, 1e4, 1e4; epochs 200, 300, 300, 400.
    static TrainParams preset(const std::string& set_id);
    void validate() const;
};

DlArchitecture make_architecture(DlVariant variant, const ChannelConfig& config, std::span<const int> bits,
                                 const TrainParams& params);

struct DlSystem {
    DlArchitecture arch;
    double p_t = 1.0;
    std::vector<RMatrix> channel;   // real embedding of H_k, 2 N_Rk x 2 N_T
    std::vector<RMatrix> precoder;  // real embedding of F_k, 2 N_T x 2 n_k (DL-NBD only)
    std::vector<nn::Network> encoders;
    std::vector<nn::Network> decoders;
    nn::Network transmitter;        // E2E only
    std::vector<nn::AdamState> encoder_opt;
    std::vector<nn::AdamState> decoder_opt;
    std::vector<nn::AdamState> transmitter_opt;
    nn::WeightedLossState loss_weights;
    std::uint64_t channel_fingerprint = 0;
    std::uint64_t precoder_fingerprint = 0;
};

std::uint64_t fingerprint(std::span<const CMatrix> matrices);

/// DL-NBD needs `precoders`; E2E must be given none.
DlSystem build(const DlArchitecture& arch, const ChannelRealization& channel, const PrecoderSet* precoders,
               double p_t, std::uint64_t seed, double learning_rate = 1e-3);

/// {0,1} bits of one user, one column per frame -> n_k x B matrix of +-0.5.
RMatrix centre_bits(std::span<const Bits> frames);

struct LinkCache {
    std::vector<nn::ForwardCache> encoders;
    std::vector<nn::ForwardCache> decoders;
    nn::ForwardCache transmitter;
    RMatrix v;      // 2 N_T x B, before normalisation
    RVector norms;  // ||v|| per column
    RMatrix x;      // normalised transmit signal
};

struct LinkOutput {
    RMatrix x;                        // 2 N_T x B, every column has squared norm P_T
    std::vector<RMatrix> received;    // decoder inputs, 2 N_Rk x B
    std::vector<RMatrix> predictions; // n_k x B
};

/// Real CN(0, variance) samples for every user: 2 N_Rk x B blocks.
std::vector<RMatrix> draw_noise(const DlArchitecture& arch, Index batch, double variance, Rng& rng);

/// Encoder(s) -> (precoder) -> normalisation -> channel -> + noise -> decoders.
/// `channel` overrides the system's channel embedding (used to transmit over a
/// true channel when the system was built from an estimate). Throws
/// NumericalError when a precoded batch column has norm below 1e-12.
LinkOutput forward_link(DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise, nn::Mode mode,
                        LinkCache* cache = nullptr, std::span<const RMatrix> channel = {});
/// Infer-mode pass; leaves the system untouched.
LinkOutput infer_link(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                      std::span<const RMatrix> channel = {});

struct LinkGradients {
    std::vector<nn::Gradients> encoders;
    std::vector<nn::Gradients> decoders;
    nn::Gradients transmitter;
};

LinkGradients backward_link(const DlSystem& sys, const LinkCache& cache, std::span<const RMatrix> prediction_grads);

struct LinkLoss {
    std::vector<double> per_user;         // mean Huber loss per user
    double value = 0.0;                   // weights . per_user
    std::vector<RMatrix> prediction_grads; // d value / d predictions
    nn::WeightedLossState next;
};

LinkLoss link_loss(const LinkOutput& out, std::span<const RMatrix> bits, const nn::WeightedLossState& weights);

/// Max relative error between backprop and central differences of the weighted
/// train-mode loss over every trainable parameter of the system.
double link_grad_check(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                       double eps = 1e-5);

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_seconds;
    nn::WeightedLossState final_weights;
};

/// Uniform random training bits, one n_k x |T| matrix of +-0.5 per user.
std::vector<RMatrix> make_training_data(std::span<const int> bits, int samples, std::uint64_t seed);

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Mini-batch training. Each step draws one SNR uniformly (dB) from the
/// configured range, runs the link in train mode, weights the per-user Huber
/// losses, updates the loss weights (per step, or per epoch when configured)
/// and takes one Adam step per network. Throws TrainingError on divergence.
TrainReport train(DlSystem& sys, const TrainParams& params, std::span<const RMatrix> data,
                  const EpochCallback& on_epoch = {});

/// Sign decisions: prediction >= 0 -> 1.
std::vector<Bits> decide(const RMatrix& predictions);

/// Bit errors of one infer-mode batch against the transmitted frames.
std::uint64_t count_errors(const DlSystem& sys, std::span<const RMatrix> bits, std::span<const RMatrix> noise,
                           std::span<const RMatrix> channel = {});

/// Random frames at each SNR, transmitted over `true_channel` when given.
BerCurve evaluate(const DlSystem& sys, std::span<const double> snr_db, int n_frames, std::uint64_t seed,
                  const ChannelRealization* true_channel = nullptr);

std::vector<RMatrix> channel_embedding(const ChannelRealization& channel);

}  // namespace mulma
