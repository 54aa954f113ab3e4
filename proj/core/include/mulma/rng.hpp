#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace mulma {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream identifiers into an independent seed (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> streams);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> streams) {
    return Rng{derive_seed(base, streams)};
}

/// Circularly-symmetric complex Gaussian sample with E|z|^2 = variance.
std::complex<double> complex_normal(Rng& rng, double variance = 1.0);

/// Stream tags used when deriving per-purpose seeds from a master seed.
namespace stream {
inline constexpr std::uint64_t kChannel = 0x43484e;
inline constexpr std::uint64_t kBits = 0x424954;
inline constexpr std::uint64_t kNoise = 0x4e4f49;
inline constexpr std::uint64_t kIcsi = 0x435349;
inline constexpr std::uint64_t kSas = 0x534153;
inline constexpr std::uint64_t kCodebook = 0x434442;
inline constexpr std::uint64_t kNetwork = 0x4e4554;
inline constexpr std::uint64_t kTraining = 0x54524e;
}  // namespace stream

}  // namespace mulma
