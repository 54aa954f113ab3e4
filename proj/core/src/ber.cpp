#include "mulma/ber.hpp"

#include <cmath>

namespace mulma {

std::pair<double, double> BerPoint::interval95() const {
    if (bits == 0) return {0.0, 1.0};
    constexpr double z = 1.959963984540054;
    const double n = static_cast<double>(bits);
    const double p = ber();
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<double> BerCurve::snr_db() const {
    std::vector<double> out;
    for (const auto& p : points) out.push_back(p.snr_db);
    return out;
}

std::vector<double> BerCurve::ber() const {
    std::vector<double> out;
    for (const auto& p : points) out.push_back(p.ber());
    return out;
}

bool separated(const BerPoint& a, const BerPoint& b) {
    const auto [alo, ahi] = a.interval95();
    const auto [blo, bhi] = b.interval95();
    return ahi < blo || bhi < alo;
}

std::optional<double> snr_at_ber(const BerCurve& curve, double target) {
    const auto& pts = curve.points;
    if (pts.empty() || !(target > 0.0) || pts.front().ber() <= target) return std::nullopt;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double hi = pts[i - 1].ber();
        const double lo = pts[i].ber();
        if (lo > target) continue;
        if (lo <= 0.0) return pts[i].snr_db;
        const double t = (std::log10(hi) - std::log10(target)) / (std::log10(hi) - std::log10(lo));
        return pts[i - 1].snr_db + t * (pts[i].snr_db - pts[i - 1].snr_db);
    }
    return std::nullopt;
}

}  // namespace mulma
