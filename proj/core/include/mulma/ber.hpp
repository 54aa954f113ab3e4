#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace mulma {

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;

    double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
    /// Wilson score interval at 95% confidence.
    std::pair<double, double> interval95() const;
};

struct BerCurve {
    std::vector<BerPoint> points;

    std::vector<double> snr_db() const;
    std::vector<double> ber() const;
};

/// True when the 95% intervals of a and b do not overlap.
bool separated(const BerPoint& a, const BerPoint& b);

/// SNR at which the curve first crosses `target`, interpolating linearly in
/// (snr_db, log10 ber). Empty when the curve never reaches the target or does
/// not start above it.
std::optional<double> snr_at_ber(const BerCurve& curve, double target);

}  // namespace mulma
