#pragma once

#include <cstdint>
#include <vector>

#include "mulma/numerics.hpp"

namespace mulma {

/// Geometry of the downlink: N_T transmit antennas, per-user receive antenna counts.
struct ChannelConfig {
    int n_tx = 1;
    std::vector<int> users;  // N_Rk per user
    int n_ray = 3;
    double spacing_over_lambda = 0.5;
    std::uint64_t seed = 0;

    int user_count() const { return static_cast<int>(users.size()); }
    int total_rx() const;
    /// Throws ConfigError on a violated invariant.
    void validate() const;
};

/// One propagation path: complex gain, arrival angle (UE side), departure angle (BS side).
struct Ray {
    cd gain;
    double arrival = 0.0;
    double departure = 0.0;
};

struct ChannelRealization {
    ChannelConfig config;
    std::vector<CMatrix> h;               // N_Rk x N_T per user
    std::vector<std::vector<Ray>> rays;   // n_ray per user
    /// Variance of the additive estimation error applied by perturb(); 0 for a true channel.
    double estimation_error_variance = 0.0;

    int user_count() const { return static_cast<int>(h.size()); }
    /// Vertical stack [H_1; ...; H_K].
    CMatrix stacked() const;
};

struct IcsiConfig {
    double sigma_e_sq = 0.0;
    std::uint64_t seed = 0;
};

/// ULA steering vector: entry i = exp(j 2 pi (d/lambda) i cos(angle)) / sqrt(n).
CVector array_response(double angle, int n, double spacing_over_lambda = 0.5);

/// H = sqrt(N_T N_R / N_ray) sum_l gain_l a_r(arrival_l) a_t(departure_l)^H.
CMatrix synthesize(int n_tx, int n_rx, double spacing_over_lambda, const std::vector<Ray>& rays);

/// Draws gains ~ CN(0,1) and angles ~ U[0, pi) for every user and ray.
ChannelRealization generate(const ChannelConfig& config);

/// Adds independent CN(0, sigma_e_sq) to every channel entry. sigma_e_sq = 0 returns the input.
ChannelRealization perturb(const ChannelRealization& h, const IcsiConfig& icsi);

}  // namespace mulma
