#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mulma/channel.hpp"
#include "mulma/numerics.hpp"

namespace mulma {

/// Transmitter structure: every user shares the whole array (FAS), or each user
/// owns a contiguous block of N_T/K antennas (SAS).
enum class Structure { kFas, kSas };

std::string_view to_string(Structure s);

struct Feasibility {
    Structure mode = Structure::kFas;
    bool ok = true;
    std::vector<std::string> violated_constraints;
};

/// Checks the system-dimension limits of each structure. Never throws.
///   FAS: N_R <= N_T, n_k <= N_Rk
///   SAS: N_T / K integer, N_R <= N_T / K, n_k == N_Rk
Feasibility validate_dims(const ChannelConfig& config, std::span<const int> bits, Structure mode);

/// Throws InfeasibleError listing every violated constraint.
void require_feasible(const ChannelConfig& config, std::span<const int> bits, Structure mode);

/// Shape-only configuration (N_T, N_Rk) recovered from per-user channel matrices.
ChannelConfig shape_of(std::span<const CMatrix> channels);

struct PrecoderSet {
    Structure mode = Structure::kFas;
    CMatrix composite;                    // N_T x N, column concatenation of blocks
    std::vector<CMatrix> blocks;          // N_T x n_k
    std::vector<CMatrix> combiners;       // n_k x N_Rk
    std::vector<RVector> singular_values; // leading n_k singular values of the equivalent channel

    int user_count() const { return static_cast<int>(blocks.size()); }
};

/// Block diagonalisation on the full array. For user k the precoder lies in the
/// null space of the other users' stacked channels and is steered onto the
/// n_k strongest right-singular directions of the resulting equivalent channel;
/// the combiner is the matching left-singular basis.
PrecoderSet fas_nbd(std::span<const CMatrix> channels, std::span<const int> bits);

/// Sub-array baseline: user k transmits from antennas [k M, (k+1) M), M = N_T/K,
/// through the null space of the other users' channels restricted to that
/// block, rotated by a random semi-unitary matrix. No combiner (identity).
PrecoderSet sas_precode(std::span<const CMatrix> channels, std::span<const int> bits, std::uint64_t seed);

/// Closed-form null-space dimension available to user k.
///   FAS: N_T - sum_{i != k} N_Ri      SAS: N_T/K - sum_{i != k} N_Ri
int null_dim(const ChannelConfig& config, std::span<const int> bits, Structure mode, int k);

/// Largest K supported with N_Rk receive antennas per user:
/// floor(N_T / N_Rk) for FAS, floor(sqrt(N_T / N_Rk)) for SAS (ignoring divisibility).
int max_users(int n_tx, int n_rx_per_user, Structure mode);

/// max_{i != k} ||H_k F_i||_F / (||H_k||_F ||F_i||_F).
double max_interference_ratio(std::span<const CMatrix> channels, const PrecoderSet& p);

}  // namespace mulma
