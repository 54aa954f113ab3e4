#include "mulma/channel.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "mulma/errors.hpp"
#include "mulma/rng.hpp"

namespace mulma {

int ChannelConfig::total_rx() const {
    return std::accumulate(users.begin(), users.end(), 0);
}

void ChannelConfig::validate() const {
    if (n_tx < 1) throw ConfigError("channel: n_tx must be >= 1");
    if (n_ray < 1) throw ConfigError("channel: n_ray must be >= 1");
    if (users.empty()) throw ConfigError("channel: at least one user is required");
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (users[k] < 1) {
            throw ConfigError("channel: user " + std::to_string(k) + " needs >= 1 receive antenna");
        }
    }
    if (!(spacing_over_lambda > 0.0) || !std::isfinite(spacing_over_lambda)) {
        throw ConfigError("channel: spacing_over_lambda must be positive");
    }
}

CMatrix ChannelRealization::stacked() const {
    Index rows = 0;
    for (const auto& hk : h) rows += hk.rows();
    CMatrix out(rows, h.empty() ? 0 : h.front().cols());
    Index r = 0;
    for (const auto& hk : h) {
        out.middleRows(r, hk.rows()) = hk;
        r += hk.rows();
    }
    return out;
}

CVector array_response(double angle, int n, double spacing_over_lambda) {
    CVector a(n);
    const double phase = 2.0 * std::numbers::pi * spacing_over_lambda * std::cos(angle);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) a(i) = std::polar(scale, phase * i);
    return a;
}

CMatrix synthesize(int n_tx, int n_rx, double spacing_over_lambda, const std::vector<Ray>& rays) {
    CMatrix hk = CMatrix::Zero(n_rx, n_tx);
    for (const Ray& ray : rays) {
        hk.noalias() += ray.gain * array_response(ray.arrival, n_rx, spacing_over_lambda) *
                        array_response(ray.departure, n_tx, spacing_over_lambda).adjoint();
    }
    hk *= std::sqrt(static_cast<double>(n_tx) * n_rx / static_cast<double>(rays.size()));
    return hk;
}

ChannelRealization generate(const ChannelConfig& config) {
    config.validate();
    ChannelRealization out;
    out.config = config;
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    for (int k = 0; k < config.user_count(); ++k) {
        Rng rng = make_rng(config.seed, {stream::kChannel, static_cast<std::uint64_t>(k)});
        std::vector<Ray> rays(config.n_ray);
        for (Ray& ray : rays) {
            ray.gain = complex_normal(rng);
            ray.arrival = angle(rng);
            ray.departure = angle(rng);
        }
        out.h.push_back(synthesize(config.n_tx, config.users[k], config.spacing_over_lambda, rays));
        out.rays.push_back(std::move(rays));
    }
    return out;
}

ChannelRealization perturb(const ChannelRealization& h, const IcsiConfig& icsi) {
    if (!(icsi.sigma_e_sq >= 0.0)) throw ConfigError("icsi: sigma_e_sq must be >= 0");
    ChannelRealization out = h;
    if (icsi.sigma_e_sq == 0.0) return out;
    out.estimation_error_variance = h.estimation_error_variance + icsi.sigma_e_sq;
    for (std::size_t k = 0; k < out.h.size(); ++k) {
        Rng rng = make_rng(icsi.seed, {stream::kIcsi, k});
        CMatrix& hk = out.h[k];
        for (Index j = 0; j < hk.cols(); ++j)
            for (Index i = 0; i < hk.rows(); ++i) hk(i, j) += complex_normal(rng, icsi.sigma_e_sq);
    }
    return out;
}

}  // namespace mulma
