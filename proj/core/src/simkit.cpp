#include "mulma/simkit.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include "mulma/errors.hpp"
#include "mulma/link.hpp"

namespace mulma {

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::kFasNbd: return "FAS-NBD";
        case Algorithm::kSas: return "SAS";
        case Algorithm::kDlNbd: return "FAS-DL-NBD";
        case Algorithm::kE2e: return "FAS-E2E";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "fas-nbd") return Algorithm::kFasNbd;
    if (lower == "sas") return Algorithm::kSas;
    if (lower == "fas-dl-nbd") return Algorithm::kDlNbd;
    if (lower == "fas-e2e") return Algorithm::kE2e;
    throw ConfigError("unknown algorithm '" + std::string(name) + "' (expected fas-nbd, sas, fas-dl-nbd, fas-e2e)");
}

Structure structure_of(Algorithm a) { return a == Algorithm::kSas ? Structure::kSas : Structure::kFas; }

bool is_learned(Algorithm a) { return a == Algorithm::kDlNbd || a == Algorithm::kE2e; }

void Scenario::validate() const {
    channel.validate();
    if (bits.size() != channel.users.size()) throw ConfigError("scenario: need one n_k per user");
    if (p_t < 0.0 || !std::isfinite(p_t)) throw ConfigError("scenario: p_t must be >= 0 (0 selects N_T)");
    if (channel_pool < 1) throw ConfigError("scenario: channel_pool must be >= 1");
    if (icsi && !(icsi->sigma_e_sq >= 0.0)) throw ConfigError("scenario: sigma_e_sq must be >= 0");
    if (is_learned(algorithm)) train.validate();
    require_feasible(channel, bits, structure_of(algorithm));
}

void StopRule::validate() const {
    if (max_bits < 1) throw ConfigError("stop rule: max_bits must be >= 1");
    if (frames_per_block < 1) throw ConfigError("stop rule: frames_per_block must be >= 1");
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<Codebook> scenario_codebooks(const Scenario& scenario) {
    const std::vector<double> powers = codeword_powers(scenario.bits, scenario.power());
    std::map<std::pair<int, double>, Codebook> built;
    std::vector<Codebook> out;
    for (std::size_t k = 0; k < scenario.bits.size(); ++k) {
        const auto key = std::make_pair(scenario.bits[k], powers[k]);
        auto it = built.find(key);
        if (it == built.end()) {
            const auto params = PmhBuildParams::defaults(
                scenario.bits[k], derive_seed(scenario.seed, {stream::kCodebook, static_cast<std::uint64_t>(scenario.bits[k])}));
            it = built.emplace(key, build_pmh(scenario.bits[k], powers[k], params)).first;
        }
        out.push_back(it->second);
    }
    return out;
}

PreparedScenario prepare(const Scenario& scenario, const PrepareOptions& options) {
    scenario.validate();
    const auto pool = static_cast<std::size_t>(scenario.channel_pool);
    if (!options.channels.empty() && options.channels.size() != pool) {
        throw ConfigError("prepare: supplied channels do not match channel_pool");
    }
    if (!options.trained.empty() && (options.trained.size() != pool || !is_learned(scenario.algorithm))) {
        throw ConfigError("prepare: supplied models do not match the scenario");
    }
    const Progress& progress = options.progress;
    PreparedScenario out;
    out.scenario = scenario;
    const double p_t = scenario.power();
    out.codebooks = scenario_codebooks(scenario);

    out.models.resize(static_cast<std::size_t>(scenario.channel_pool));
    parallel_for(out.models.size(), options.threads, [&](std::size_t c) {
        ChannelModel& m = out.models[c];
        ChannelConfig cfg = scenario.channel;
        cfg.seed = derive_seed(scenario.seed, {stream::kChannel, c});
        if (options.channels.empty()) {
            m.truth = generate(cfg);
        } else {
            m.truth = options.channels[c];
            const ChannelConfig& given = m.truth.config;
            if (given.n_tx != cfg.n_tx || given.users != cfg.users) {
                throw ConfigError("prepare: supplied channel does not match the system dimensions");
            }
        }
        m.estimate = scenario.icsi
                         ? perturb(m.truth, {scenario.icsi->sigma_e_sq, derive_seed(scenario.icsi->seed, {stream::kIcsi, c})})
                         : m.truth;
        if (scenario.algorithm == Algorithm::kSas) {
            m.precoders = sas_precode(m.estimate.h, scenario.bits, derive_seed(scenario.seed, {stream::kSas, c}));
        } else if (scenario.algorithm != Algorithm::kE2e) {
            m.precoders = fas_nbd(m.estimate.h, scenario.bits);
        }
        if (!is_learned(scenario.algorithm)) return;
        if (!options.trained.empty()) {
            const DlSystem& given = options.trained[c];
            if (given.channel_fingerprint != fingerprint(m.estimate.h)) {
                throw ConfigError("prepare: model " + std::to_string(c) + " was trained on a different channel");
            }
            const std::uint64_t precoder_fp =
                scenario.algorithm == Algorithm::kDlNbd ? fingerprint(m.precoders.blocks) : 0;
            if (given.precoder_fingerprint != precoder_fp) {
                throw ConfigError("prepare: model " + std::to_string(c) + " was trained with a different precoder");
            }
            m.learned = given;
            return;
        }

        const TrainParams& tp = scenario.train;
        const DlVariant variant = scenario.algorithm == Algorithm::kDlNbd ? DlVariant::kDlNbd : DlVariant::kE2e;
        const DlArchitecture arch = make_architecture(variant, cfg, scenario.bits, tp);
        DlSystem sys = build(arch, m.estimate, variant == DlVariant::kDlNbd ? &m.precoders : nullptr, p_t,
                             derive_seed(scenario.seed, {stream::kNetwork, tp.seed, c}), tp.learning_rate);
        TrainParams run = tp;
        run.seed = derive_seed(scenario.seed, {stream::kTraining, tp.seed, c});
        const auto data = make_training_data(scenario.bits, tp.samples, derive_seed(scenario.seed, {stream::kBits, tp.seed, c}));
        const std::string tag = std::string(to_string(scenario.algorithm)) + " channel " + std::to_string(c);
        if (progress) progress("training " + tag);
        m.report = train(sys, run, data, [&](int epoch, double loss) {
            if (progress && ((epoch + 1) % 50 == 0 || epoch + 1 == run.epochs)) {
                progress(tag + " epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
            }
        });
        m.learned = std::move(sys);
    });
    return out;
}

namespace {

struct BlockDraw {
    std::vector<std::vector<Bits>> bits;   // [frame][user]
    std::vector<std::vector<CVector>> noise; // [frame][user], CN(0, 1)
};

BlockDraw draw_block(const Scenario& s, std::uint64_t block, int frames) {
    BlockDraw d;
    Rng bit_rng = make_rng(s.seed, {stream::kBits, block});
    Rng noise_rng = make_rng(s.seed, {stream::kNoise, block});
    std::bernoulli_distribution coin;
    d.bits.resize(static_cast<std::size_t>(frames));
    d.noise.resize(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        for (std::size_t k = 0; k < s.bits.size(); ++k) {
            Bits b(static_cast<std::size_t>(s.bits[k]));
            for (auto& bit : b) bit = coin(bit_rng) ? 1 : 0;
            d.bits[f].push_back(std::move(b));
            CVector n(s.channel.users[k]);
            for (Index i = 0; i < n.size(); ++i) n(i) = complex_normal(noise_rng);
            d.noise[f].push_back(std::move(n));
        }
    }
    return d;
}

std::vector<MlDetector> make_detectors(const PreparedScenario& p, const ChannelModel& m) {
    std::vector<MlDetector> out;
    for (std::size_t k = 0; k < p.codebooks.size(); ++k) {
        out.emplace_back(m.precoders.combiners[k], m.estimate.h[k], m.precoders.blocks[k], p.codebooks[k]);
    }
    return out;
}

}  // namespace

BerPoint simulate_block(const PreparedScenario& prepared, double snr_db, std::uint64_t block, int frames) {
    const Scenario& s = prepared.scenario;
    const ChannelModel& m = prepared.models[block % prepared.models.size()];
    const BlockDraw d = draw_block(s, block, frames);
    const double sigma = std::sqrt(noise_variance(snr_db));
    const int users = static_cast<int>(s.bits.size());
    const int total_bits = std::accumulate(s.bits.begin(), s.bits.end(), 0);
    BerPoint point{snr_db, static_cast<std::uint64_t>(frames) * static_cast<std::uint64_t>(total_bits), 0};

    if (m.learned) {
        std::vector<RMatrix> bits;
        std::vector<RMatrix> noise;
        for (int k = 0; k < users; ++k) {
            std::vector<Bits> column(static_cast<std::size_t>(frames));
            RMatrix n(2 * s.channel.users[k], frames);
            for (int f = 0; f < frames; ++f) {
                column[f] = d.bits[f][k];
                n.col(f) = sigma * to_real_block(d.noise[f][k]);
            }
            bits.push_back(centre_bits(column));
            noise.push_back(std::move(n));
        }
        point.errors = count_errors(*m.learned, bits, noise, channel_embedding(m.truth));
        return point;
    }

    const std::vector<MlDetector> detectors = make_detectors(prepared, m);
    const double p_t = s.power();
    for (int f = 0; f < frames; ++f) {
        const TxFrame tx = modulate(d.bits[f], prepared.codebooks, m.precoders, p_t);
        for (int k = 0; k < users; ++k) {
            const CVector y = m.truth.h[k] * tx.x + sigma * d.noise[f][k];
            const std::size_t sent = bits_to_index(d.bits[f][k]);
            point.errors += static_cast<std::uint64_t>(std::popcount(detectors[k].detect(y) ^ sent));
        }
    }
    return point;
}

BerCurve ber_sweep(const PreparedScenario& prepared, std::span<const double> snr_db, const StopRule& stop,
                   int threads) {
    stop.validate();
    BerCurve curve;
    curve.points.resize(snr_db.size());
    parallel_for(snr_db.size(), threads, [&](std::size_t i) {
        BerPoint acc{snr_db[i], 0, 0};
        const std::uint64_t pool = prepared.models.size();
        for (std::uint64_t b = 0;; ++b) {
            const BerPoint r = simulate_block(prepared, snr_db[i], b, stop.frames_per_block);
            acc.bits += r.bits;
            acc.errors += r.errors;
            if ((b + 1) % pool == 0 && (acc.errors >= stop.min_errors || acc.bits >= stop.max_bits)) break;
        }
        curve.points[i] = acc;
    });
    return curve;
}

TrainParams preset_for_users(int users) {
    static const char* kSets[] = {"I", "II", "III"};
    if (users < 2 || users > 4) throw ConfigError("no default training set for K=" + std::to_string(users));
    return TrainParams::preset(kSets[users - 2]);
}

std::vector<UserCell> user_sweep(const Scenario& base, std::span<const int> users, std::span<const Algorithm> algorithms,
                                 double snr_db, const StopRule& stop, int threads,
                                 const std::optional<TrainParams>& train, const Progress& progress) {
    if (base.channel.users.empty() || base.bits.empty()) throw ConfigError("user_sweep: base scenario needs one user");
    std::vector<UserCell> cells;
    for (int k_users : users) {
        if (k_users < 1) throw ConfigError("user_sweep: K must be >= 1");
        for (Algorithm a : algorithms) {
            Scenario s = base;
            s.algorithm = a;
            s.channel.users.assign(static_cast<std::size_t>(k_users), base.channel.users.front());
            s.bits.assign(static_cast<std::size_t>(k_users), base.bits.front());
            UserCell cell{a, k_users, std::nullopt};
            if (!validate_dims(s.channel, s.bits, structure_of(a)).ok) {
                cells.push_back(cell);
                continue;
            }
            if (is_learned(a)) {
                if (train) {
                    s.train = *train;
                } else {
                    s.train = preset_for_users(k_users);
                }
                s.train.seed = base.train.seed;
            }
            if (progress) progress("K=" + std::to_string(k_users) + " " + std::string(to_string(a)));
            const PreparedScenario p = prepare(s, {threads, progress, {}, {}});
            const double snr[] = {snr_db};
            cell.point = ber_sweep(p, snr, stop, threads).points.front();
            cells.push_back(cell);
        }
    }
    return cells;
}

std::vector<IcsiCurve> icsi_sweep(const Scenario& scenario, std::span<const double> sigma_e_sq,
                                  std::span<const double> snr_db, const StopRule& stop, int threads,
                                  const Progress& progress) {
    std::vector<IcsiCurve> out;
    const std::uint64_t icsi_seed = scenario.icsi ? scenario.icsi->seed : scenario.seed;
    for (double sigma : sigma_e_sq) {
        Scenario s = scenario;
        s.icsi = IcsiConfig{sigma, icsi_seed};
        if (progress) progress("sigma_e^2=" + std::to_string(sigma));
        const PreparedScenario p = prepare(s, {threads, progress, {}, {}});
        out.push_back({sigma, ber_sweep(p, snr_db, stop, threads)});
    }
    return out;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double seconds(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TimingReport timing_bench(std::span<const PreparedScenario> prepared, double snr_db, int repetitions,
                          int frames_per_repetition) {
    if (prepared.empty()) throw ConfigError("timing_bench: nothing to time");
    if (repetitions < 1 || frames_per_repetition < 1) throw ConfigError("timing_bench: counts must be >= 1");
    TimingReport report{prepared.front().scenario.algorithm, {}};
    const double sigma = std::sqrt(noise_variance(snr_db));
    volatile double sink = 0.0;
    for (const PreparedScenario& p : prepared) {
        const Scenario& s = p.scenario;
        if (s.algorithm != report.algorithm) throw ConfigError("timing_bench: mixed algorithms");
        const ChannelModel& m = p.models.front();
        const int users = static_cast<int>(s.bits.size());
        const int frames = frames_per_repetition;
        const BlockDraw d = draw_block(s, 0, frames);
        const double per = 1.0 / (static_cast<double>(frames) * users);
        std::vector<double> t_o;
        std::vector<double> t_d;
        TimingPoint point;
        point.n_k = s.bits.front();

        if (m.learned) {
            const DlSystem& sys = *m.learned;
            std::vector<std::vector<RMatrix>> bits(frames), noise(frames);
            std::vector<std::vector<RMatrix>> received(frames);
            for (int f = 0; f < frames; ++f) {
                for (int k = 0; k < users; ++k) {
                    bits[f].push_back(centre_bits(std::span(&d.bits[f][k], 1)));
                    noise[f].push_back(sigma * to_real_block(d.noise[f][k]));
                }
                received[f] = infer_link(sys, bits[f], noise[f]).received;
            }
            for (int r = 0; r < repetitions; ++r) {
                t_d.push_back(per * seconds([&] {
                    for (int f = 0; f < frames; ++f)
                        for (int k = 0; k < users; ++k) sink = sink + decide(nn::infer(sys.decoders[k], received[f][k]))[0][0];
                }));
                t_o.push_back(per * seconds([&] {
                    for (int f = 0; f < frames; ++f) {
                        const LinkOutput out = infer_link(sys, bits[f], noise[f]);
                        for (int k = 0; k < users; ++k) sink = sink + decide(out.predictions[k])[0][0];
                    }
                }));
            }
        } else {
            const double p_t = s.power();
            std::vector<std::vector<CVector>> received(frames);
            for (int f = 0; f < frames; ++f) {
                const TxFrame tx = modulate(d.bits[f], p.codebooks, m.precoders, p_t);
                for (int k = 0; k < users; ++k) received[f].push_back(m.truth.h[k] * tx.x + sigma * d.noise[f][k]);
            }
            for (int r = 0; r < repetitions; ++r) {
                DetectionStats stats;
                t_d.push_back(per * seconds([&] {
                    for (int f = 0; f < frames; ++f)
                        for (int k = 0; k < users; ++k)
                            sink = sink + static_cast<double>(ml_detect_index(received[f][k], m.precoders.combiners[k],
                                                                              m.estimate.h[k], m.precoders.blocks[k],
                                                                              p.codebooks[k], &stats));
                }));
                point.candidate_evaluations = stats.candidate_evaluations;
                t_o.push_back(per * seconds([&] {
                    for (int f = 0; f < frames; ++f) {
                        const TxFrame tx = modulate(d.bits[f], p.codebooks, m.precoders, p_t);
                        for (int k = 0; k < users; ++k) {
                            const CVector y = m.truth.h[k] * tx.x + sigma * d.noise[f][k];
                            sink = sink + static_cast<double>(ml_detect_index(y, m.precoders.combiners[k], m.estimate.h[k],
                                                                              m.precoders.blocks[k], p.codebooks[k]));
                        }
                    }
                }));
            }
        }
        point.t_d = median(t_d);
        point.t_o = std::max(median(t_o), point.t_d);
        report.points.push_back(point);
    }
    return report;
}

std::vector<ConstellationPoint> constellation_dump(const PreparedScenario& prepared, int user) {
    const Scenario& s = prepared.scenario;
    if (user < 0 || user >= static_cast<int>(s.bits.size())) throw ConfigError("constellation: user out of range");
    const ChannelModel& m = prepared.models.front();
    const int n_k = s.bits[user];
    const std::size_t count = std::size_t{1} << n_k;
    std::vector<ConstellationPoint> out;
    auto emit = [&](std::size_t i, const CVector& v) {
        for (Index d = 0; d < v.size(); ++d) out.push_back({user, i, static_cast<int>(d), v(d)});
    };
    if (m.learned) {
        const DlSystem& sys = *m.learned;
        const std::vector<RMatrix> channel = channel_embedding(m.truth);
        for (std::size_t i = 0; i < count; ++i) {
            std::vector<RMatrix> bits;
            for (std::size_t k = 0; k < s.bits.size(); ++k) {
                const Bits b = static_cast<int>(k) == user ? index_to_bits(i, n_k) : Bits(s.bits[k], 0);
                bits.push_back(centre_bits(std::span(&b, 1)));
            }
            Rng unused;
            const auto noise = draw_noise(sys.arch, 1, 0.0, unused);
            const LinkOutput o = infer_link(sys, bits, noise, channel);
            emit(i, from_real_block(o.received[user].col(0)));
        }
        return out;
    }
    const CMatrix eff = m.precoders.combiners[user] * m.truth.h[user] * m.precoders.blocks[user];
    for (std::size_t i = 0; i < count; ++i) emit(i, eff * prepared.codebooks[user].codewords[i]);
    return out;
}

LossComparison loss_compare(const ChannelConfig& config, std::span<const int> bits, const TrainParams& params,
                            std::uint64_t seed, double p_t) {
    params.validate();
    ChannelConfig cfg = config;
    cfg.seed = derive_seed(seed, {stream::kChannel, 0});
    const ChannelRealization h = generate(cfg);
    require_feasible(cfg, bits, Structure::kFas);
    const PrecoderSet f = fas_nbd(h.h, bits);
    const double power = p_t > 0.0 ? p_t : static_cast<double>(cfg.n_tx);
    const auto data = make_training_data(bits, params.samples, derive_seed(seed, {stream::kBits, params.seed}));
    TrainParams run = params;
    run.seed = derive_seed(seed, {stream::kTraining, params.seed});
    const std::uint64_t net_seed = derive_seed(seed, {stream::kNetwork, params.seed});

    LossComparison out;
    DlSystem dl = build(make_architecture(DlVariant::kDlNbd, cfg, bits, params), h, &f, power, net_seed,
                        params.learning_rate);
    out.dl_nbd = train(dl, run, data);
    DlSystem e2e = build(make_architecture(DlVariant::kE2e, cfg, bits, params), h, nullptr, power, net_seed,
                         params.learning_rate);
    out.e2e = train(e2e, run, data);
    return out;
}

std::string version_string() { return "mulma 0.1.0"; }

namespace {

std::ofstream open_csv(const std::string& path, bool append = false) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

}  // namespace

void write_ber_csv(const std::string& path, const BerCurve& curve) {
    auto out = open_csv(path);
    out << "snr_db,ber,bits,errors\n";
    for (const auto& p : curve.points) out << p.snr_db << ',' << p.ber() << ',' << p.bits << ',' << p.errors << '\n';
}

void write_loss_csv(const std::string& path, std::span<const double> losses, std::string_view variant, bool append) {
    const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    auto out = open_csv(path, append);
    if (header) out << "epoch,loss,variant\n";
    for (std::size_t e = 0; e < losses.size(); ++e) out << e + 1 << ',' << losses[e] << ',' << variant << '\n';
}

void write_timing_csv(const std::string& path, std::span<const TimingReport> reports) {
    auto out = open_csv(path);
    out << "n_k,t_o_s,t_d_s,algorithm\n";
    for (const auto& r : reports)
        for (const auto& p : r.points) out << p.n_k << ',' << p.t_o << ',' << p.t_d << ',' << to_string(r.algorithm) << '\n';
}

void write_constellation_csv(const std::string& path, std::span<const ConstellationPoint> points) {
    auto out = open_csv(path);
    out << "user,codeword_index,dim,re,im\n";
    for (const auto& p : points)
        out << p.user << ',' << p.codeword << ',' << p.dim << ',' << p.value.real() << ',' << p.value.imag() << '\n';
}

void write_sidecar(const std::string& csv_path, const nlohmann::json& record) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".run.json");
    nlohmann::json doc = record;
    doc["version"] = version_string();
    doc["data"] = std::filesystem::path(csv_path).filename().string();
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << doc.dump(2) << '\n';
}

}  // namespace mulma
