#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mulma/ber.hpp"
#include "mulma/channel.hpp"
#include "mulma/codebook.hpp"
#include "mulma/dlnbd.hpp"
#include "mulma/precoding.hpp"

namespace mulma {

enum class Algorithm { kFasNbd, kSas, kDlNbd, kE2e };
std::string_view to_string(Algorithm a);
/// Accepts "fas-nbd", "sas", "fas-dl-nbd", "fas-e2e" (case-insensitive).
Algorithm parse_algorithm(std::string_view name);
Structure structure_of(Algorithm a);
bool is_learned(Algorithm a);

struct Scenario {
    ChannelConfig channel;
    std::vector<int> bits;  // n_k
    Algorithm algorithm = Algorithm::kFasNbd;
    double p_t = 0.0;       // 0 selects N_T
    TrainParams train;      // learned algorithms only
    std::optional<IcsiConfig> icsi;
    /// Independent channel realisations; Monte Carlo blocks cycle through them.
    int channel_pool = 1;
    std::uint64_t seed = 0;

    double power() const { return p_t > 0.0 ? p_t : static_cast<double>(channel.n_tx); }
    /// ConfigError for malformed values, InfeasibleError for violated dimension limits.
    void validate() const;
};

/// Everything a Monte Carlo run needs for one channel of the pool: the true
/// channel, the transmitter's estimate of it, and the models built from the estimate.
struct ChannelModel {
    ChannelRealization truth;
    ChannelRealization estimate;
    PrecoderSet precoders;              // classic algorithms and DL-NBD
    std::optional<DlSystem> learned;    // learned algorithms
    std::optional<TrainReport> report;
};

struct PreparedScenario {
    Scenario scenario;
    std::vector<Codebook> codebooks;  // per user
    std::vector<ChannelModel> models; // per pool entry
};

using Progress = std::function<void(const std::string&)>;

struct PrepareOptions {
    int threads = 1;
    Progress progress;
    /// Replaces the generated pool when non-empty (must hold channel_pool entries).
    std::vector<ChannelRealization> channels;
    /// Pre-trained learned systems, one per pool entry; skips training when non-empty.
    std::vector<DlSystem> trained;
};

/// One PMH codebook per user, with power P_T n_k / N.
std::vector<Codebook> scenario_codebooks(const Scenario& scenario);

/// Draws the channel pool, builds precoders and codebooks, and trains the
/// learned models (one per channel). Deterministic in the scenario seeds.
PreparedScenario prepare(const Scenario& scenario, const PrepareOptions& options = {});

/// Per-SNR stop rule: simulate blocks of frames until min_errors bit errors or max_bits bits.
/// The rule is checked only after complete passes over the channel pool, so every
/// point of every curve averages over the same channels.
struct StopRule {
    std::uint64_t min_errors = 200;
    std::uint64_t max_bits = 1'000'000;
    int frames_per_block = 1000;

    void validate() const;
};

/// Errors over one block of frames. Block b uses pool channel b mod pool size and
/// bit and unit-noise streams derived from (seed, b) only, so every algorithm and
/// every SNR sees the same bits and noise directions.
BerPoint simulate_block(const PreparedScenario& prepared, double snr_db, std::uint64_t block, int frames);

BerCurve ber_sweep(const PreparedScenario& prepared, std::span<const double> snr_db, const StopRule& stop,
                   int threads = 1);

struct UserCell {
    Algorithm algorithm;
    int users = 0;
    std::optional<BerPoint> point;  // empty when the configuration is infeasible
};

/// BER at a single SNR for each (algorithm, K). `base` supplies N_T, N_Rk, N_ray,
/// n_k (per user, replicated to K) and seeds; learned algorithms use the
/// training preset matching K (2 -> I, 3 -> II, 4 -> III) unless `train` is given.
std::vector<UserCell> user_sweep(const Scenario& base, std::span<const int> users, std::span<const Algorithm> algorithms,
                                 double snr_db, const StopRule& stop, int threads = 1,
                                 const std::optional<TrainParams>& train = std::nullopt,
                                 const Progress& progress = {});

/// Training preset for a user count: 2 -> I, 3 -> II, 4 -> III.
TrainParams preset_for_users(int users);

struct IcsiCurve {
    double sigma_e_sq = 0.0;
    BerCurve curve;
};

/// One BER curve per estimation-error variance; precoders and training use the
/// estimate, transmission uses the true channel.
std::vector<IcsiCurve> icsi_sweep(const Scenario& scenario, std::span<const double> sigma_e_sq,
                                  std::span<const double> snr_db, const StopRule& stop, int threads = 1,
                                  const Progress& progress = {});

struct TimingPoint {
    int n_k = 0;
    double t_o = 0.0;  // seconds per frame per user, full link
    double t_d = 0.0;  // seconds per frame per user, detection only
    std::uint64_t candidate_evaluations = 0;
};

struct TimingReport {
    Algorithm algorithm;
    std::vector<TimingPoint> points;
};

/// Median wall-clock per frame per user at `snr_db` for each prepared scenario
/// (classic or learned). Classic detection is the exhaustive search that forms
/// every candidate as W (H (F t)).
TimingReport timing_bench(std::span<const PreparedScenario> prepared, double snr_db, int repetitions,
                          int frames_per_repetition = 200);

struct ConstellationPoint {
    int user = 0;
    std::size_t codeword = 0;
    int dim = 0;
    cd value;
};

/// Noiseless receive points of user k for every one of its 2^{n_k} codewords on
/// pool channel 0. Classic: W_k H_k F_k t_i. Learned: the decoder input
/// (H_k x as complex N_Rk-vector) with every other user sending bits 0...0.
std::vector<ConstellationPoint> constellation_dump(const PreparedScenario& prepared, int user);

struct LossComparison {
    TrainReport dl_nbd;
    TrainReport e2e;
};

/// Trains both learned variants on the same channel, data and seeds.
LossComparison loss_compare(const ChannelConfig& config, std::span<const int> bits, const TrainParams& params,
                            std::uint64_t seed, double p_t = 0.0);

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
/// Rethrows the exception of the lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::string version_string();

void write_ber_csv(const std::string& path, const BerCurve& curve);
void write_loss_csv(const std::string& path, std::span<const double> losses, std::string_view variant,
                    bool append = false);
void write_timing_csv(const std::string& path, std::span<const TimingReport> reports);
void write_constellation_csv(const std::string& path, std::span<const ConstellationPoint> points);
/// `<stem>.run.json` next to the artifact holding the run record and version.
void write_sidecar(const std::string& csv_path, const nlohmann::json& record);

}  // namespace mulma
