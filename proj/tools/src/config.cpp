#include "mulma_cli/config.hpp"

#include <cstdlib>

#include "embedded_configs.hpp"
#include "mulma/errors.hpp"
#include "mulma/serialize.hpp"

namespace mulma::cli {
namespace {

std::string_view type_name(const json& j) {
    if (j.is_null()) return "null";
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    return "object";
}

bool compatible(const json& def, const json& value) {
    if (def.is_null()) return value.is_null() || value.is_number() || value.is_boolean();
    if (def.is_number()) return value.is_number();
    return type_name(def) == type_name(value);
}

template <typename T>
T read(const json& doc, const json::json_pointer& ptr) {
    try {
        return doc.at(ptr).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + ptr.to_string().substr(1) + "': " + e.what());
    }
}

template <typename T>
T read(const json& doc, const std::string& dotted) {
    std::string ptr = "/" + dotted;
    for (char& c : ptr) c = c == '.' ? '/' : c;
    return read<T>(doc, json::json_pointer(ptr));
}

}  // namespace

json default_config() { return json::parse(embedded::kDefaults); }

std::optional<json> embedded_config(std::string_view name) {
    for (const auto& [key, text] : embedded::kDocuments) {
        if (key == name) return json::parse(text);
    }
    return std::nullopt;
}

void merge_config(json& base, const json& user, const std::string& where) {
    if (!user.is_object()) throw ConfigError("config" + (where.empty() ? "" : " '" + where + "'") + " must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        json& slot = base[key];
        if (slot.is_object()) {
            merge_config(slot, value, path);
            continue;
        }
        if (!compatible(slot, value)) {
            throw ConfigError("config key '" + path + "' expects " + std::string(type_name(slot)) + ", got " +
                              std::string(type_name(value)));
        }
        if (!slot.is_null() || !value.is_null()) slot = value;
    }
}

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' must look like key.path=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json patch = value;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        parts.push_back(key.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (it->empty()) throw ConfigError("override key '" + key + "' has an empty component");
        patch = json{{*it, patch}};
    }
    merge_config(doc, patch);
}

json config_from_file(const std::string& path) {
    json doc = io::load_json(path);
    if (doc.is_object() && doc.contains("version") && doc.contains("config")) return doc.at("config");
    return doc;
}

ChannelConfig channel_config_from(const json& doc) {
    ChannelConfig c;
    c.n_tx = read<int>(doc, "system.n_tx");
    c.users = read<std::vector<int>>(doc, "system.rx");
    c.n_ray = read<int>(doc, "system.n_ray");
    c.spacing_over_lambda = read<double>(doc, "system.spacing_over_lambda");
    c.seed = read<std::uint64_t>(doc, "seed");
    c.validate();
    return c;
}

TrainParams train_from(const json& doc, const std::optional<std::string>& set) {
    TrainParams p = TrainParams::preset(set.value_or(read<std::string>(doc, "train.set")));
    const json& t = doc.at("train");
    auto take = [&](const char* key, auto& field) {
        if (!t.at(key).is_null()) field = read<std::decay_t<decltype(field)>>(t, json::json_pointer(std::string("/") + key));
    };
    take("width", p.width);
    take("encoder_hidden", p.encoder_hidden);
    take("decoder_hidden", p.decoder_hidden);
    take("batch_size", p.batch_size);
    take("samples", p.samples);
    take("epochs", p.epochs);
    take("learning_rate", p.learning_rate);
    take("snr_min_db", p.snr_min_db);
    take("snr_max_db", p.snr_max_db);
    p.per_epoch_weights = read<bool>(doc, "train.per_epoch_weights");
    p.seed = read<std::uint64_t>(doc, "train.seed");
    p.validate();
    return p;
}

Scenario scenario_from(const json& doc, Algorithm algorithm) {
    Scenario s;
    s.channel = channel_config_from(doc);
    s.bits = read<std::vector<int>>(doc, "system.bits");
    s.algorithm = algorithm;
    s.p_t = read<double>(doc, "system.p_t");
    s.train = train_from(doc);
    s.channel_pool = read<int>(doc, "channel_pool");
    s.seed = read<std::uint64_t>(doc, "seed");
    return s;
}

StopRule stop_from(const json& doc) {
    StopRule r;
    r.min_errors = read<std::uint64_t>(doc, "stop.min_errors");
    r.max_bits = static_cast<std::uint64_t>(read<double>(doc, "stop.max_bits"));
    r.frames_per_block = read<int>(doc, "stop.frames_per_block");
    r.validate();
    return r;
}

std::vector<Algorithm> algorithms_from(const json& doc) {
    std::vector<Algorithm> out;
    for (const auto& name : read<std::vector<std::string>>(doc, "algorithms")) out.push_back(parse_algorithm(name));
    if (out.empty()) out.push_back(parse_algorithm(read<std::string>(doc, "algorithm")));
    return out;
}

std::vector<double> snr_from(const json& doc) {
    auto snr = read<std::vector<double>>(doc, "snr_db");
    if (snr.empty()) throw ConfigError("config key 'snr_db' must not be empty");
    return snr;
}

std::string output_dir_from(const json& doc) {
    auto dir = read<std::string>(doc, "output_dir");
    if (!dir.empty()) return dir;
    if (const char* env = std::getenv("MULMA_OUTPUT_DIR"); env && *env) return env;
    return "mulma-out";
}

void validate_config(const json& doc) {
    json probe = default_config();
    merge_config(probe, doc);
    channel_config_from(doc);
    const auto bits = read<std::vector<int>>(doc, "system.bits");
    if (bits.size() != read<std::vector<int>>(doc, "system.rx").size()) {
        throw ConfigError("system.bits and system.rx must have one entry per user");
    }
    train_from(doc);
    stop_from(doc);
    algorithms_from(doc);
    snr_from(doc);
    if (read<int>(doc, "threads") < 0) throw ConfigError("threads must be >= 0");
    if (read<int>(doc, "channel_pool") < 1) throw ConfigError("channel_pool must be >= 1");
    if (read<double>(doc, "system.p_t") < 0.0) throw ConfigError("system.p_t must be >= 0");
    for (double s : read<std::vector<double>>(doc, "icsi.sigma_e_sq")) {
        if (!(s >= 0.0)) throw ConfigError("icsi.sigma_e_sq values must be >= 0");
    }
    for (int k : read<std::vector<int>>(doc, "users.k")) {
        if (k < 1) throw ConfigError("users.k values must be >= 1");
    }
    for (int n : read<std::vector<int>>(doc, "timing.n_k")) {
        if (n < 1) throw ConfigError("timing.n_k values must be >= 1");
    }
    if (read<int>(doc, "timing.repetitions") < 1 || read<int>(doc, "timing.frames") < 1) {
        throw ConfigError("timing.repetitions and timing.frames must be >= 1");
    }
    if (read<std::vector<std::uint64_t>>(doc, "loss.seeds").empty()) throw ConfigError("loss.seeds must not be empty");
    read<int>(doc, "constellation.user");
    read<std::string>(doc, "paths.channel");
    read<std::string>(doc, "paths.checkpoint");
}

}  // namespace mulma::cli
