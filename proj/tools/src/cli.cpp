#include "mulma_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mulma/errors.hpp"
#include "mulma/serialize.hpp"
#include "mulma/simkit.hpp"
#include "mulma_cli/config.hpp"

namespace mulma::cli {
namespace fs = std::filesystem;
namespace {

struct Context {
    std::string command;
    json doc;
    fs::path out_dir;
    int threads = 0;
    bool quiet = false;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    Progress progress() const {
        if (quiet) return {};
        return [e = err](const std::string& msg) { *e << "[mulma] " << msg << '\n'; };
    }
    void log(const std::string& msg) const {
        if (!quiet) *err << "[mulma] " << msg << '\n';
    }
    std::string path(const std::string& name) const { return (out_dir / name).string(); }
    void record(const std::string& artifact, json extra = json::object()) const {
        json r = {{"command", command}, {"config", doc}};
        r.update(extra);
        write_sidecar(artifact, r);
        *out << artifact << '\n';
    }
    void save(const std::string& artifact, const json& body, json extra = json::object()) const {
        io::save_json(artifact, body);
        record(artifact, std::move(extra));
    }
};

std::string slug(Algorithm a) {
    switch (a) {
        case Algorithm::kFasNbd: return "fas-nbd";
        case Algorithm::kSas: return "sas";
        case Algorithm::kDlNbd: return "fas-dl-nbd";
        case Algorithm::kE2e: return "fas-e2e";
    }
    return "unknown";
}

std::vector<ChannelRealization> input_channels(const Context& ctx) {
    const auto path = ctx.doc.at("paths").at("channel").get<std::string>();
    if (path.empty()) return {};
    return {io::channel_from_json(io::load_json(path))};
}

PrepareOptions options(const Context& ctx, const Scenario& s) {
    PrepareOptions o{ctx.threads, ctx.progress(), input_channels(ctx), {}};
    if (!o.channels.empty() && s.channel_pool != 1) throw ConfigError("paths.channel requires channel_pool = 1");
    const auto ckpt = ctx.doc.at("paths").at("checkpoint").get<std::string>();
    if (!ckpt.empty() && is_learned(s.algorithm)) {
        const json doc = io::load_json(ckpt);
        if (doc.value("kind", "") != "dl-model-pool") throw ConfigError(ckpt + ": not a trained-model checkpoint");
        Scenario base = s;
        base.algorithm = Algorithm::kFasNbd;
        PrepareOptions plain{ctx.threads, {}, o.channels, {}};
        const PreparedScenario classic = prepare(base, plain);
        const json& models = doc.at("models");
        if (models.size() != classic.models.size()) throw ConfigError(ckpt + ": model count does not match channel_pool");
        for (std::size_t c = 0; c < classic.models.size(); ++c) {
            const ChannelModel& m = classic.models[c];
            o.trained.push_back(io::dl_system_from_json(
                models[c], m.estimate, s.algorithm == Algorithm::kDlNbd ? &m.precoders : nullptr));
        }
    }
    return o;
}

json scenario_record(const Scenario& s) {
    return {{"algorithm", to_string(s.algorithm)},
            {"seed", s.seed},
            {"channel_pool", s.channel_pool},
            {"p_t", s.power()}};
}

void cmd_channel(const Context& ctx) {
    const Scenario s = scenario_from(ctx.doc, parse_algorithm("fas-nbd"));
    std::vector<ChannelRealization> pool;
    for (int c = 0; c < s.channel_pool; ++c) {
        ChannelConfig cfg = s.channel;
        cfg.seed = derive_seed(s.seed, {stream::kChannel, static_cast<std::uint64_t>(c)});
        pool.push_back(generate(cfg));
    }
    for (std::size_t c = 0; c < pool.size(); ++c) {
        const std::string name = pool.size() == 1 ? "channel.json" : "channel_" + std::to_string(c) + ".json";
        ctx.save(ctx.path(name), io::to_json(pool[c]), {{"pool_index", c}});
    }
}

void cmd_codebook(const Context& ctx) {
    const Scenario s = scenario_from(ctx.doc, parse_algorithm("fas-nbd"));
    const auto books = scenario_codebooks(s);
    for (std::size_t k = 0; k < books.size(); ++k) {
        ctx.save(ctx.path("codebook_user" + std::to_string(k) + ".json"), io::to_json(books[k]),
                 {{"min_distance", books[k].size() > 1 ? min_distance(books[k]) : 0.0}});
    }
}

void cmd_precode(const Context& ctx) {
    for (Algorithm a : algorithms_from(ctx.doc)) {
        if (a == Algorithm::kE2e) throw ConfigError("precode: FAS-E2E has no precoder");
        Scenario s = scenario_from(ctx.doc, a == Algorithm::kSas ? a : Algorithm::kFasNbd);
        const PreparedScenario p = prepare(s, {ctx.threads, {}, input_channels(ctx), {}});
        for (std::size_t c = 0; c < p.models.size(); ++c) {
            const ChannelModel& m = p.models[c];
            json body = io::to_json(m.precoders);
            body["channel"] = io::to_json(m.truth);
            const double mui = max_interference_ratio(m.truth.h, m.precoders);
            const std::string name = "precoders_" + slug(a) + (p.models.size() == 1 ? "" : "_" + std::to_string(c)) + ".json";
            ctx.save(ctx.path(name), body, {{"max_interference_ratio", mui}});
        }
    }
}

void cmd_train(const Context& ctx) {
    for (Algorithm a : algorithms_from(ctx.doc)) {
        if (!is_learned(a)) throw ConfigError("train: algorithm " + std::string(to_string(a)) + " has nothing to train");
        const Scenario s = scenario_from(ctx.doc, a);
        PrepareOptions o{ctx.threads, ctx.progress(), input_channels(ctx), {}};
        const PreparedScenario p = prepare(s, o);
        json pool = {{"kind", "dl-model-pool"}, {"format", io::kFormatVersion}, {"models", json::array()}};
        bool first = true;
        const std::string loss_path = ctx.path("loss_" + slug(a) + ".csv");
        for (const ChannelModel& m : p.models) {
            pool["models"].push_back(io::to_json(*m.learned));
            write_loss_csv(loss_path, m.report->epoch_loss, to_string(a), !first);
            first = false;
        }
        ctx.save(ctx.path("model_" + slug(a) + ".json"), pool, {{"scenario", scenario_record(s)}});
        ctx.record(loss_path, {{"scenario", scenario_record(s)}});
    }
}

void cmd_ber(const Context& ctx) {
    const auto snr = snr_from(ctx.doc);
    const StopRule stop = stop_from(ctx.doc);
    for (Algorithm a : algorithms_from(ctx.doc)) {
        const Scenario s = scenario_from(ctx.doc, a);
        ctx.log("BER sweep " + std::string(to_string(a)));
        const PreparedScenario p = prepare(s, options(ctx, s));
        const BerCurve curve = ber_sweep(p, snr, stop, ctx.threads);
        const std::string path = ctx.path("ber_" + slug(a) + ".csv");
        write_ber_csv(path, curve);
        ctx.record(path, {{"scenario", scenario_record(s)}});
    }
}

void cmd_users(const Context& ctx) {
    Scenario base = scenario_from(ctx.doc, Algorithm::kFasNbd);
    const auto ks = ctx.doc.at("users").at("k").get<std::vector<int>>();
    const double snr = ctx.doc.at("users").at("snr_db").get<double>();
    std::optional<TrainParams> train;
    if (!ctx.doc.at("train").at("epochs").is_null()) {
        train = train_from(ctx.doc);
    }
    const auto algorithms = algorithms_from(ctx.doc);
    const auto cells = user_sweep(base, ks, algorithms, snr, stop_from(ctx.doc), ctx.threads, train, ctx.progress());
    const std::string path = ctx.path("users.csv");
    fs::create_directories(ctx.out_dir);
    std::ofstream out(path);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "users,algorithm,snr_db,ber,bits,errors\n";
    for (const UserCell& c : cells) {
        if (!c.point) {
            ctx.log("K=" + std::to_string(c.users) + " infeasible for " + std::string(to_string(c.algorithm)));
            continue;
        }
        out << c.users << ',' << to_string(c.algorithm) << ',' << snr << ',' << c.point->ber() << ',' << c.point->bits
            << ',' << c.point->errors << '\n';
    }
    out.close();
    ctx.record(path);
}

void cmd_icsi(const Context& ctx) {
    const auto snr = snr_from(ctx.doc);
    const auto sigmas = ctx.doc.at("icsi").at("sigma_e_sq").get<std::vector<double>>();
    for (Algorithm a : algorithms_from(ctx.doc)) {
        Scenario s = scenario_from(ctx.doc, a);
        s.icsi = IcsiConfig{0.0, ctx.doc.at("icsi").at("seed").get<std::uint64_t>()};
        const auto curves = icsi_sweep(s, sigmas, snr, stop_from(ctx.doc), ctx.threads, ctx.progress());
        const std::string path = ctx.path("icsi_" + slug(a) + ".csv");
        fs::create_directories(ctx.out_dir);
        std::ofstream out(path);
        out << std::setprecision(std::numeric_limits<double>::max_digits10);
        out << "sigma_e_sq,snr_db,ber,bits,errors\n";
        for (const IcsiCurve& c : curves)
            for (const BerPoint& p : c.curve.points)
                out << c.sigma_e_sq << ',' << p.snr_db << ',' << p.ber() << ',' << p.bits << ',' << p.errors << '\n';
        out.close();
        ctx.record(path, {{"scenario", scenario_record(s)}});
    }
}

void cmd_bench(const Context& ctx) {
    const json& t = ctx.doc.at("timing");
    std::vector<TimingReport> reports;
    for (Algorithm a : algorithms_from(ctx.doc)) {
        if (a == Algorithm::kSas) throw ConfigError("bench: timing covers FAS-NBD and the learned variants");
        std::vector<PreparedScenario> prepared;
        for (int n_k : t.at("n_k").get<std::vector<int>>()) {
            Scenario s = scenario_from(ctx.doc, a);
            s.bits.assign(s.channel.users.size(), n_k);
            ctx.log("timing " + std::string(to_string(a)) + " n_k=" + std::to_string(n_k));
            prepared.push_back(prepare(s, {ctx.threads, ctx.progress(), {}, {}}));
        }
        reports.push_back(timing_bench(prepared, t.at("snr_db").get<double>(), t.at("repetitions").get<int>(),
                                       t.at("frames").get<int>()));
    }
    const std::string path = ctx.path("timing.csv");
    write_timing_csv(path, reports);
    ctx.record(path);
}

void cmd_constellation(const Context& ctx) {
    const int user = ctx.doc.at("constellation").at("user").get<int>();
    for (Algorithm a : algorithms_from(ctx.doc)) {
        Scenario s = scenario_from(ctx.doc, a);
        s.channel_pool = 1;
        const PreparedScenario p = prepare(s, options(ctx, s));
        const std::string path = ctx.path("constellation_" + slug(a) + ".csv");
        write_constellation_csv(path, constellation_dump(p, user));
        ctx.record(path, {{"scenario", scenario_record(s)}});
    }
}

void cmd_loss_compare(const Context& ctx) {
    const Scenario s = scenario_from(ctx.doc, Algorithm::kDlNbd);
    const auto seeds = ctx.doc.at("loss").at("seeds").get<std::vector<std::uint64_t>>();
    std::vector<double> dl(static_cast<std::size_t>(s.train.epochs), 0.0);
    std::vector<double> e2e(dl.size(), 0.0);
    for (std::uint64_t seed : seeds) {
        ctx.log("loss comparison seed " + std::to_string(seed));
        const LossComparison r = loss_compare(s.channel, s.bits, s.train, seed, s.p_t);
        for (std::size_t e = 0; e < dl.size(); ++e) {
            dl[e] += r.dl_nbd.epoch_loss[e] / static_cast<double>(seeds.size());
            e2e[e] += r.e2e.epoch_loss[e] / static_cast<double>(seeds.size());
        }
        if (seeds.size() > 1) {
            const std::string path = ctx.path("loss_seed" + std::to_string(seed) + ".csv");
            write_loss_csv(path, r.dl_nbd.epoch_loss, to_string(DlVariant::kDlNbd));
            write_loss_csv(path, r.e2e.epoch_loss, to_string(DlVariant::kE2e), true);
            ctx.record(path, {{"loss_seed", seed}});
        }
    }
    const std::string path = ctx.path("loss.csv");
    write_loss_csv(path, dl, to_string(DlVariant::kDlNbd));
    write_loss_csv(path, e2e, to_string(DlVariant::kE2e), true);
    ctx.record(path, {{"averaged_over_seeds", seeds}});
}

using Command = void (*)(const Context&);

Command command_for(const std::string& name) {
    if (name == "channel") return cmd_channel;
    if (name == "codebook") return cmd_codebook;
    if (name == "precode") return cmd_precode;
    if (name == "train") return cmd_train;
    if (name == "ber") return cmd_ber;
    if (name == "users") return cmd_users;
    if (name == "icsi") return cmd_icsi;
    if (name == "bench") return cmd_bench;
    if (name == "constellation") return cmd_constellation;
    if (name == "loss-compare") return cmd_loss_compare;
    return nullptr;
}

std::string figure_command(const std::string& fig) {
    if (fig == "fig4") return "loss-compare";
    if (fig == "fig5") return "ber";
    if (fig == "fig7") return "users";
    if (fig == "fig8") return "bench";
    if (fig == "fig9") return "icsi";
    throw ConfigError("reproduce: unknown figure '" + fig + "' (expected fig4, fig5, fig7, fig8 or fig9)");
}

/// Checks every scenario the command will run so infeasible dimensions fail
/// before any compute.
void check_feasible(const std::string& command, const json& doc) {
    if (command == "users" || command == "channel" || command == "codebook") return;
    for (Algorithm a : algorithms_from(doc)) {
        Scenario s = scenario_from(doc, a);
        if (command == "bench") {
            for (int n_k : doc.at("timing").at("n_k").get<std::vector<int>>()) {
                s.bits.assign(s.channel.users.size(), n_k);
                s.validate();
            }
        } else {
            s.validate();
        }
    }
}

json plan(const std::string& command, const json& doc) {
    json p = {{"command", command}, {"output_dir", output_dir_from(doc)}};
    json algos = json::array();
    for (Algorithm a : algorithms_from(doc)) algos.push_back(to_string(a));
    p["algorithms"] = algos;
    const Scenario s = scenario_from(doc, Algorithm::kFasNbd);
    const TrainParams t = s.train;
    p["training"] = {{"set", t.set_id},       {"epochs", t.epochs},           {"samples", t.samples},
                     {"batch_size", t.batch_size}, {"width", t.width},     {"encoder_hidden", t.encoder_hidden},
                     {"decoder_hidden", t.decoder_hidden}, {"learning_rate", t.learning_rate},
                     {"snr_db", {t.snr_min_db, t.snr_max_db}}};
    p["config"] = doc;
    return p;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Downlink multiuser load-modulation-array link simulator"};
    app.set_version_flag("--version", version_string());
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string output;
    bool dry_run = false;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "JSON config file (or a run record sidecar)");
    app.add_option("--set", overrides, "Override a config key: key.path=value")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");
    app.add_option("-o,--output", output, "Output directory");
    app.add_flag("--dry-run", dry_run, "Validate and print the resolved plan without computing");
    app.add_flag("-q,--quiet", quiet, "No progress messages");
    app.require_subcommand(1);

    const char* names[] = {"channel", "codebook", "precode", "train", "ber", "users", "icsi",
                           "bench", "constellation", "loss-compare"};
    const char* help[] = {"Generate and save channel realisations",
                          "Build and save the per-user codebooks",
                          "Build and save precoders",
                          "Train the learned variants and save checkpoints",
                          "BER versus SNR for each algorithm",
                          "BER versus user count at one SNR",
                          "BER under imperfect CSI",
                          "Detection and overall timing versus n_k",
                          "Noiseless receive constellations",
                          "Training-loss comparison of the two learned variants"};
    for (std::size_t i = 0; i < std::size(names); ++i) app.add_subcommand(names[i], help[i])->fallthrough();
    std::string figure;
    auto* repro = app.add_subcommand("reproduce", "Run the desk-scale reproduction of one figure")->fallthrough();
    repro->add_option("figure", figure, "fig4, fig5, fig7, fig8 or fig9")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << version_string() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        Context ctx;
        ctx.out = &out;
        ctx.err = &err;
        ctx.quiet = quiet;
        ctx.command = app.get_subcommands().front()->get_name();
        json doc = default_config();
        std::string command = ctx.command;
        if (command == "reproduce") {
            command = figure_command(figure);
            merge_config(doc, *embedded_config(figure));
        }
        if (!config_path.empty()) merge_config(doc, config_from_file(config_path));
        for (const auto& o : overrides) apply_override(doc, o);
        if (seed) doc["seed"] = *seed;
        if (threads) doc["threads"] = *threads;
        if (!output.empty()) doc["output_dir"] = output;
        validate_config(doc);
        check_feasible(command, doc);

        if (dry_run) {
            out << plan(ctx.command == "reproduce" ? "reproduce " + figure : command, doc).dump(2) << '\n';
            return 0;
        }
        ctx.doc = doc;
        ctx.threads = doc.at("threads").get<int>();
        ctx.out_dir = fs::path(output_dir_from(doc));
        if (ctx.command == "reproduce") ctx.out_dir /= figure;
        fs::create_directories(ctx.out_dir);
        command_for(command)(ctx);
        return 0;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace mulma::cli
