#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mulma/codebook.hpp"
#include "mulma/numerics.hpp"
#include "mulma/precoding.hpp"
#include "mulma/rng.hpp"

namespace mulma {

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

/// Per-antenna complex noise variance for a given SNR: sigma^2 = 10^(-snr_db/10).
/// With P_T = N_T this is the transmit power per antenna over the noise variance.
/// +inf maps to 0.
double noise_variance(double snr_db);

struct NoiseConfig {
    double snr_db = kNoiselessSnr;
    std::uint64_t seed = 0;

    double variance() const { return noise_variance(snr_db); }
};

struct TxFrame {
    std::vector<Bits> bits;   // per user
    CVector symbols;          // stacked codewords s
    CVector x;                // transmitted vector, ||x||^2 = P_T
    double normalization = 1; // sqrt(P_T) / ||F s||
};

/// Splits P_T over users in proportion to their bit counts; with equal n_k every
/// user gets P_T / K, so ||s||^2 = P_T.
std::vector<double> codeword_powers(std::span<const int> bits, double p_t);

/// Encode every user's bits, precode, and rescale so ||x||^2 = P_T.
TxFrame modulate(std::span<const Bits> bits, std::span<const Codebook> codebooks, const PrecoderSet& precoders,
                 double p_t);

/// y = H x + n with n ~ CN(0, variance I).
CVector transmit(const CVector& x, const CMatrix& h, double variance, Rng& rng);
CVector transmit(const CVector& x, const CMatrix& h, const NoiseConfig& noise);

struct DetectionStats {
    std::uint64_t candidate_evaluations = 0;
};

/// Exhaustive ML search argmin_t ||W H F t - W y|| over every codeword, each
/// candidate image formed as W (H (F t)). Ties resolve to the lowest index.
std::size_t ml_detect_index(const CVector& y, const CMatrix& w, const CMatrix& h, const CMatrix& f,
                            const Codebook& cb, DetectionStats* stats = nullptr);

Bits ml_detect(const CVector& y, const CMatrix& w, const CMatrix& h, const CMatrix& f, const Codebook& cb,
               DetectionStats* stats = nullptr);

/// ML detector for a fixed (W, H, F, codebook): candidate images are formed once.
/// Produces the same decisions as ml_detect_index.
class MlDetector {
public:
    MlDetector(const CMatrix& w, const CMatrix& h, const CMatrix& f, const Codebook& cb);

    std::size_t detect(const CVector& y) const;
    const CMatrix& combiner() const { return w_; }
    /// Noiseless combined receive points, one column per codeword.
    const CMatrix& images() const { return images_; }

private:
    CMatrix w_;
    CMatrix images_;
};

/// Peak-to-average sum power max ||x||^2 / mean ||x||^2.
double paspr(std::span<const TxFrame> frames);
double paspr(std::span<const CVector> signals);

}  // namespace mulma
