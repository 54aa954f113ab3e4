#include "mulma/link.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mulma/errors.hpp"

namespace mulma {

double noise_variance(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}

std::vector<double> codeword_powers(std::span<const int> bits, double p_t) {
    const double total = std::accumulate(bits.begin(), bits.end(), 0.0);
    std::vector<double> out;
    out.reserve(bits.size());
    for (int nk : bits) out.push_back(p_t * nk / total);
    return out;
}

TxFrame modulate(std::span<const Bits> bits, std::span<const Codebook> codebooks, const PrecoderSet& precoders,
                 double p_t) {
    if (!(p_t > 0.0)) throw ConfigError("modulate: p_t must be positive");
    const std::size_t k_users = precoders.blocks.size();
    if (bits.size() != k_users || codebooks.size() != k_users) {
        throw DimensionError("modulate: need one bit vector and one codebook per user");
    }
    TxFrame frame;
    frame.bits.assign(bits.begin(), bits.end());
    frame.symbols.resize(precoders.composite.cols());
    Index offset = 0;
    for (std::size_t k = 0; k < k_users; ++k) {
        if (codebooks[k].n_bits != precoders.blocks[k].cols()) {
            throw DimensionError("modulate: codebook of user " + std::to_string(k) + " does not match n_k");
        }
        const CVector& t = encode_bits(codebooks[k], bits[k]);
        frame.symbols.segment(offset, t.size()) = t;
        offset += t.size();
    }
    const CVector v = precoders.composite * frame.symbols;
    const double norm = v.norm();
    if (!(norm > 1e-12)) throw NumericalError("modulate: precoded signal has zero norm, cannot normalise");
    frame.normalization = std::sqrt(p_t) / norm;
    frame.x = frame.normalization * v;
    return frame;
}

CVector transmit(const CVector& x, const CMatrix& h, double variance, Rng& rng) {
    if (h.cols() != x.size()) throw DimensionError("transmit: channel/signal size mismatch");
    CVector y = h * x;
    if (variance > 0.0)
        for (Index i = 0; i < y.size(); ++i) y(i) += complex_normal(rng, variance);
    return y;
}

CVector transmit(const CVector& x, const CMatrix& h, const NoiseConfig& noise) {
    Rng rng{noise.seed};
    return transmit(x, h, noise.variance(), rng);
}

std::size_t ml_detect_index(const CVector& y, const CMatrix& w, const CMatrix& h, const CMatrix& f,
                            const Codebook& cb, DetectionStats* stats) {
    const CVector target = w * y;
    std::size_t best = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cb.codewords.size(); ++i) {
        const CVector image = w * (h * (f * cb.codewords[i]));
        const double metric = (image - target).squaredNorm();
        if (metric < best_metric) {
            best_metric = metric;
            best = i;
        }
    }
    if (stats) stats->candidate_evaluations += cb.codewords.size();
    return best;
}

Bits ml_detect(const CVector& y, const CMatrix& w, const CMatrix& h, const CMatrix& f, const Codebook& cb,
               DetectionStats* stats) {
    return index_to_bits(ml_detect_index(y, w, h, f, cb, stats), cb.n_bits);
}

MlDetector::MlDetector(const CMatrix& w, const CMatrix& h, const CMatrix& f, const Codebook& cb) : w_(w) {
    images_.resize(w.rows(), static_cast<Index>(cb.size()));
    for (std::size_t i = 0; i < cb.size(); ++i) images_.col(static_cast<Index>(i)) = w * (h * (f * cb.codewords[i]));
}

std::size_t MlDetector::detect(const CVector& y) const {
    const CVector target = w_ * y;
    Index best = 0;
    (images_.colwise() - target).colwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
}

double paspr(std::span<const CVector> signals) {
    if (signals.empty()) throw ConfigError("paspr: no frames");
    double peak = 0.0;
    double sum = 0.0;
    for (const auto& x : signals) {
        const double p = x.squaredNorm();
        peak = std::max(peak, p);
        sum += p;
    }
    const double mean = sum / static_cast<double>(signals.size());
    if (!(mean > 0.0)) throw NumericalError("paspr: zero average power");
    return peak / mean;
}

double paspr(std::span<const TxFrame> frames) {
    std::vector<CVector> xs;
    xs.reserve(frames.size());
    for (const auto& f : frames) xs.push_back(f.x);
    return paspr(xs);
}

}  // namespace mulma
