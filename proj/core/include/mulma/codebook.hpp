#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mulma/numerics.hpp"

namespace mulma {

using Bits = std::vector<std::uint8_t>;

/// Constant-power codebook: 2^n_bits codewords in C^n_bits, all with squared norm `power`.
/// Codeword i carries the bit pattern whose natural binary value (first bit most
/// significant) is i.
struct Codebook {
    int n_bits = 0;
    double power = 0.0;
    std::vector<CVector> codewords;

    std::size_t size() const { return codewords.size(); }

    /// Throws ConfigError when the size, dimensions, norms or distinctness invariants fail.
    void validate() const;
};

struct PmhBuildParams {
    std::size_t sample_count = 1000;
    int max_iters = 300;
    std::uint64_t seed = 0;

    /// sample_count = max(1000, 64 M).
    static PmhBuildParams defaults(int n_bits, std::uint64_t seed);
};

/// Phase modulation on the hypersphere: K-means (k-means++ seeded) over uniform
/// samples of the unit sphere in C^n, centroids rescaled to norm sqrt(power) and
/// sorted into a canonical lexicographic order.
Codebook build_pmh(int n_bits, double power, const PmhBuildParams& params);

/// Smallest pairwise Euclidean distance. Requires at least two codewords.
double min_distance(const Codebook& cb);

std::size_t bits_to_index(std::span<const std::uint8_t> bits);
Bits index_to_bits(std::size_t index, int n_bits);

/// Codeword selected by the natural binary value of `bits` (length must equal n_bits).
const CVector& encode_bits(const Codebook& cb, std::span<const std::uint8_t> bits);

}  // namespace mulma
