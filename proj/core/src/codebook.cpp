#include "mulma/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mulma/errors.hpp"
#include "mulma/rng.hpp"

namespace mulma {
namespace {

constexpr int kMaxBits = 16;
constexpr double kMoveTolerance = 1e-8;
constexpr int kReseedAttempts = 8;

// Squared distances between every centroid (columns of c) and sample (columns of x): M x N.
RMatrix squared_distances(const RMatrix& c, const RMatrix& x, const RVector& x_norms) {
    RMatrix d = -2.0 * (c.transpose() * x);
    d.colwise() += c.colwise().squaredNorm().transpose();
    d.rowwise() += x_norms.transpose();
    return d;
}

RMatrix plus_plus_seeding(const RMatrix& x, Index m, Rng& rng) {
    const Index n = x.cols();
    RMatrix c(x.rows(), m);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    c.col(0) = x.col(pick(rng));
    RVector best = (x.colwise() - c.col(0)).colwise().squaredNorm().transpose();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index j = 1; j < m; ++j) {
        const double total = best.sum();
        Index chosen = n - 1;
        if (total > 0.0) {
            double target = u(rng) * total;
            for (Index i = 0; i < n; ++i) {
                target -= best(i);
                if (target <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        c.col(j) = x.col(chosen);
        best = best.cwiseMin((x.colwise() - c.col(j)).colwise().squaredNorm().transpose());
    }
    return c;
}

CVector to_codeword(const Eigen::Ref<const RVector>& unit, int n, double power) {
    CVector t(n);
    const double scale = std::sqrt(power) / unit.norm();
    for (int i = 0; i < n; ++i) t(i) = cd(unit(i), unit(n + i)) * scale;
    return t;
}

bool canonical_less(const CVector& a, const CVector& b) {
    for (Index i = 0; i < a.size(); ++i) {
        const auto ar = std::llround(a(i).real() * 1e9), br = std::llround(b(i).real() * 1e9);
        if (ar != br) return ar < br;
        const auto ai = std::llround(a(i).imag() * 1e9), bi = std::llround(b(i).imag() * 1e9);
        if (ai != bi) return ai < bi;
    }
    return false;
}

}  // namespace

void Codebook::validate() const {
    if (n_bits < 1 || n_bits > kMaxBits) throw ConfigError("codebook: n_bits must be in [1, 16]");
    if (!(power > 0.0) || !std::isfinite(power)) throw ConfigError("codebook: power must be positive");
    if (codewords.size() != (std::size_t{1} << n_bits)) {
        throw ConfigError("codebook: expected 2^" + std::to_string(n_bits) + " codewords, got " +
                          std::to_string(codewords.size()));
    }
    for (std::size_t i = 0; i < codewords.size(); ++i) {
        const CVector& t = codewords[i];
        if (t.size() != n_bits || !t.allFinite()) {
            throw ConfigError("codebook: codeword " + std::to_string(i) + " has wrong size or non-finite entries");
        }
        if (std::abs(t.squaredNorm() - power) > 1e-9 * power) {
            throw ConfigError("codebook: codeword " + std::to_string(i) + " is off the power sphere");
        }
    }
    if (min_distance(*this) <= 0.0) throw ConfigError("codebook: duplicated codeword");
}

PmhBuildParams PmhBuildParams::defaults(int n_bits, std::uint64_t seed) {
    PmhBuildParams p;
    p.sample_count = std::max<std::size_t>(1000, 64 * (std::size_t{1} << std::clamp(n_bits, 0, kMaxBits)));
    p.seed = seed;
    return p;
}

Codebook build_pmh(int n_bits, double power, const PmhBuildParams& params) {
    if (n_bits < 1 || n_bits > kMaxBits) throw ConfigError("build_pmh: n_bits must be in [1, 16]");
    if (!(power > 0.0)) throw ConfigError("build_pmh: power must be positive");
    const Index m = Index{1} << n_bits;
    if (params.sample_count < static_cast<std::size_t>(16 * m)) {
        throw ConfigError("build_pmh: sample_count must be >= 16 * 2^n_bits");
    }
    if (params.max_iters < 1) throw ConfigError("build_pmh: max_iters must be >= 1");

    Rng rng{params.seed};
    std::normal_distribution<double> normal;
    const Index dim = 2 * n_bits;
    const Index n = static_cast<Index>(params.sample_count);
    RMatrix x(dim, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < dim; ++i) x(i, j) = normal(rng);
        x.col(j).normalize();
    }
    const RVector x_norms = x.colwise().squaredNorm().transpose();

    RMatrix c = plus_plus_seeding(x, m, rng);
    std::vector<Index> label(n, 0);
    for (int iter = 0; iter < params.max_iters; ++iter) {
        const RMatrix d = squared_distances(c, x, x_norms);
        for (Index j = 0; j < n; ++j) d.col(j).minCoeff(&label[j]);

        RMatrix next = RMatrix::Zero(dim, m);
        std::vector<Index> count(m, 0);
        for (Index j = 0; j < n; ++j) {
            next.col(label[j]) += x.col(j);
            ++count[label[j]];
        }
        for (Index k = 0; k < m; ++k) {
            int attempts = 0;
            while (count[k] == 0) {
                if (++attempts > kReseedAttempts) {
                    throw NumericalError("build_pmh: empty cluster " + std::to_string(k) + " after reseeding");
                }
                // Move the empty centroid onto the sample worst served by its cluster.
                Index worst = 0;
                double worst_d = -1.0;
                for (Index j = 0; j < n; ++j) {
                    if (count[label[j]] > 1 && d(label[j], j) > worst_d) {
                        worst_d = d(label[j], j);
                        worst = j;
                    }
                }
                if (worst_d < 0.0) continue;
                const Index from = label[worst];
                next.col(from) -= x.col(worst);
                --count[from];
                label[worst] = k;
                next.col(k) = x.col(worst);
                count[k] = 1;
            }
            next.col(k) /= static_cast<double>(count[k]);
        }
        const double moved = (next - c).colwise().norm().maxCoeff();
        c = std::move(next);
        if (moved < kMoveTolerance) break;
    }

    Codebook cb;
    cb.n_bits = n_bits;
    cb.power = power;
    cb.codewords.reserve(m);
    for (Index k = 0; k < m; ++k) {
        if (c.col(k).norm() == 0.0) throw NumericalError("build_pmh: zero centroid");
        cb.codewords.push_back(to_codeword(c.col(k), n_bits, power));
    }
    std::sort(cb.codewords.begin(), cb.codewords.end(), canonical_less);
    cb.validate();
    return cb;
}

double min_distance(const Codebook& cb) {
    if (cb.codewords.size() < 2) throw ConfigError("min_distance: need at least two codewords");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cb.codewords.size(); ++i)
        for (std::size_t j = i + 1; j < cb.codewords.size(); ++j)
            best = std::min(best, (cb.codewords[i] - cb.codewords[j]).norm());
    return best;
}

std::size_t bits_to_index(std::span<const std::uint8_t> bits) {
    std::size_t index = 0;
    for (auto b : bits) index = (index << 1) | (b ? 1u : 0u);
    return index;
}

Bits index_to_bits(std::size_t index, int n_bits) {
    Bits bits(n_bits);
    for (int i = n_bits - 1; i >= 0; --i) {
        bits[i] = static_cast<std::uint8_t>(index & 1u);
        index >>= 1;
    }
    return bits;
}

const CVector& encode_bits(const Codebook& cb, std::span<const std::uint8_t> bits) {
    if (static_cast<int>(bits.size()) != cb.n_bits) {
        throw DimensionError("encode_bits: expected " + std::to_string(cb.n_bits) + " bits, got " +
                             std::to_string(bits.size()));
    }
    return cb.codewords[bits_to_index(bits)];
}

}  // namespace mulma
