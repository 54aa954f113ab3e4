#include "mulma/serialize.hpp"

#include <filesystem>
#include <fstream>

#include "mulma/errors.hpp"

namespace mulma::io {
namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

const json& field(const json& j, const char* key) {
    require(j.is_object() && j.contains(key), std::string("missing field '") + key + "'");
    return j.at(key);
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

void check_version(const json& j, const char* kind) {
    require(get<std::string>(j, "kind") == kind, std::string("expected a ") + kind + " document");
    require(get<int>(j, "format") == kFormatVersion, std::string(kind) + ": unsupported format version");
}

json header(const char* kind) { return {{"kind", kind}, {"format", kFormatVersion}}; }

json vector_to_json(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RVector vector_from_json(const json& j, Index expected, const char* what) {
    require(j.is_array() && static_cast<Index>(j.size()) == expected, std::string(what) + ": wrong length");
    RVector v(expected);
    for (Index i = 0; i < expected; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

}  // namespace

json to_json(const CMatrix& m) {
    json data = json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) data.push_back({m(r, c).real(), m(r, c).imag()});
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

CMatrix cmatrix_from_json(const json& j) {
    const auto rows = get<Index>(j, "rows");
    const auto cols = get<Index>(j, "cols");
    const json& data = field(j, "data");
    require(rows >= 0 && cols >= 0 && data.is_array() && static_cast<Index>(data.size()) == rows * cols,
            "complex matrix: data does not match rows x cols");
    CMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            const json& e = data[static_cast<std::size_t>(r * cols + c)];
            require(e.is_array() && e.size() == 2, "complex matrix: entries must be [re, im]");
            m(r, c) = cd(e[0].get<double>(), e[1].get<double>());
        }
    }
    require(m.allFinite(), "complex matrix: non-finite entry");
    return m;
}

json to_json(const RMatrix& m) {
    json data = json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

RMatrix rmatrix_from_json(const json& j) {
    const auto rows = get<Index>(j, "rows");
    const auto cols = get<Index>(j, "cols");
    const json& data = field(j, "data");
    require(rows >= 0 && cols >= 0 && data.is_array() && static_cast<Index>(data.size()) == rows * cols,
            "real matrix: data does not match rows x cols");
    RMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
    require(m.allFinite(), "real matrix: non-finite entry");
    return m;
}

json to_json(const ChannelConfig& c) {
    return {{"n_tx", c.n_tx},
            {"users", c.users},
            {"n_ray", c.n_ray},
            {"spacing_over_lambda", c.spacing_over_lambda},
            {"seed", c.seed}};
}

ChannelConfig channel_config_from_json(const json& j) {
    ChannelConfig c;
    c.n_tx = get<int>(j, "n_tx");
    c.users = get<std::vector<int>>(j, "users");
    c.n_ray = get<int>(j, "n_ray");
    c.spacing_over_lambda = get<double>(j, "spacing_over_lambda");
    c.seed = get<std::uint64_t>(j, "seed");
    c.validate();
    return c;
}

json to_json(const ChannelRealization& h) {
    json doc = header("channel");
    doc["config"] = to_json(h.config);
    doc["estimation_error_variance"] = h.estimation_error_variance;
    json users = json::array();
    for (int k = 0; k < h.user_count(); ++k) {
        json rays = json::array();
        for (const Ray& r : h.rays[k]) {
            rays.push_back({{"gain", {r.gain.real(), r.gain.imag()}}, {"arrival", r.arrival}, {"departure", r.departure}});
        }
        users.push_back({{"h", to_json(h.h[k])}, {"rays", rays}});
    }
    doc["users"] = users;
    return doc;
}

ChannelRealization channel_from_json(const json& j) {
    check_version(j, "channel");
    ChannelRealization h;
    h.config = channel_config_from_json(field(j, "config"));
    h.estimation_error_variance = get<double>(j, "estimation_error_variance");
    const json& users = field(j, "users");
    require(users.is_array() && static_cast<int>(users.size()) == h.config.user_count(), "channel: user count mismatch");
    for (int k = 0; k < h.config.user_count(); ++k) {
        const json& u = users[static_cast<std::size_t>(k)];
        CMatrix m = cmatrix_from_json(field(u, "h"));
        require(m.rows() == h.config.users[k] && m.cols() == h.config.n_tx, "channel: matrix shape mismatch");
        std::vector<Ray> rays;
        for (const json& r : field(u, "rays")) {
            const auto g = get<std::vector<double>>(r, "gain");
            require(g.size() == 2, "channel: ray gain must be [re, im]");
            rays.push_back({cd(g[0], g[1]), get<double>(r, "arrival"), get<double>(r, "departure")});
        }
        h.h.push_back(std::move(m));
        h.rays.push_back(std::move(rays));
    }
    return h;
}

json to_json(const Codebook& cb) {
    json doc = header("codebook");
    doc["n_bits"] = cb.n_bits;
    doc["power"] = cb.power;
    json words = json::array();
    for (const CVector& w : cb.codewords) words.push_back(to_json(CMatrix(w)));
    doc["codewords"] = words;
    return doc;
}

Codebook codebook_from_json(const json& j) {
    check_version(j, "codebook");
    Codebook cb;
    cb.n_bits = get<int>(j, "n_bits");
    cb.power = get<double>(j, "power");
    for (const json& w : field(j, "codewords")) {
        const CMatrix m = cmatrix_from_json(w);
        require(m.cols() == 1, "codebook: codewords must be column vectors");
        cb.codewords.push_back(m.col(0));
    }
    cb.validate();
    return cb;
}

json to_json(const PrecoderSet& p) {
    json doc = header("precoders");
    doc["mode"] = std::string(to_string(p.mode));
    json users = json::array();
    for (int k = 0; k < p.user_count(); ++k) {
        users.push_back({{"block", to_json(p.blocks[k])},
                         {"combiner", to_json(p.combiners[k])},
                         {"singular_values", vector_to_json(p.singular_values[k])}});
    }
    doc["users"] = users;
    return doc;
}

PrecoderSet precoders_from_json(const json& j) {
    check_version(j, "precoders");
    PrecoderSet p;
    const auto mode = get<std::string>(j, "mode");
    require(mode == "FAS" || mode == "SAS", "precoders: mode must be FAS or SAS");
    p.mode = mode == "FAS" ? Structure::kFas : Structure::kSas;
    Index n_tx = -1;
    Index total = 0;
    for (const json& u : field(j, "users")) {
        CMatrix f = cmatrix_from_json(field(u, "block"));
        CMatrix w = cmatrix_from_json(field(u, "combiner"));
        require(n_tx < 0 || f.rows() == n_tx, "precoders: blocks must share N_T");
        require(w.rows() == f.cols(), "precoders: combiner rows must equal n_k");
        n_tx = f.rows();
        total += f.cols();
        p.singular_values.push_back(vector_from_json(field(u, "singular_values"), f.cols(), "singular_values"));
        p.blocks.push_back(std::move(f));
        p.combiners.push_back(std::move(w));
    }
    require(!p.blocks.empty(), "precoders: no users");
    p.composite.resize(n_tx, total);
    Index col = 0;
    for (const CMatrix& f : p.blocks) {
        p.composite.middleCols(col, f.cols()) = f;
        col += f.cols();
    }
    return p;
}

json to_json(const nn::Network& net) {
    json layers = json::array();
    for (const nn::Layer& l : net.layers) {
        json e = {{"kind", l.has_batchnorm() ? "dense_bn_relu" : "dense"},
                  {"in", l.spec.in_dim},
                  {"out", l.spec.out_dim},
                  {"weight", to_json(l.weight)},
                  {"bias", vector_to_json(l.bias)}};
        if (l.has_batchnorm()) {
            e["gain"] = vector_to_json(l.gain);
            e["shift"] = vector_to_json(l.shift);
            e["running_mean"] = vector_to_json(l.running_mean);
            e["running_var"] = vector_to_json(l.running_var);
        }
        layers.push_back(e);
    }
    return {{"layers", layers}};
}

nn::Network network_from_json(const json& j) {
    nn::Network net;
    for (const json& e : field(j, "layers")) {
        nn::Layer l;
        const auto kind = get<std::string>(e, "kind");
        require(kind == "dense" || kind == "dense_bn_relu", "network: unknown layer kind '" + kind + "'");
        l.spec = {kind == "dense" ? nn::LayerKind::kDense : nn::LayerKind::kDenseBnRelu, get<int>(e, "in"),
                  get<int>(e, "out")};
        require(l.spec.in_dim >= 1 && l.spec.out_dim >= 1, "network: layer dims must be >= 1");
        l.weight = rmatrix_from_json(field(e, "weight"));
        l.bias = vector_from_json(field(e, "bias"), l.has_batchnorm() ? 0 : l.spec.out_dim, "bias");
        if (l.has_batchnorm()) {
            l.gain = vector_from_json(field(e, "gain"), l.spec.out_dim, "gain");
            l.shift = vector_from_json(field(e, "shift"), l.spec.out_dim, "shift");
            l.running_mean = vector_from_json(field(e, "running_mean"), l.spec.out_dim, "running_mean");
            l.running_var = vector_from_json(field(e, "running_var"), l.spec.out_dim, "running_var");
        }
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

namespace {

json grads_to_json(const nn::Gradients& g) {
    json layers = json::array();
    for (const auto& l : g.layers) {
        layers.push_back({{"weight", to_json(l.weight)},
                          {"bias", vector_to_json(l.bias)},
                          {"gain", vector_to_json(l.gain)},
                          {"shift", vector_to_json(l.shift)}});
    }
    return layers;
}

nn::Gradients grads_from_json(const json& j, const nn::Network& net) {
    require(j.is_array() && j.size() == net.layers.size(), "adam: moment layer count mismatch");
    nn::Gradients g;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const nn::Layer& l = net.layers[i];
        nn::LayerGrad lg;
        lg.weight = rmatrix_from_json(field(j[i], "weight"));
        require(lg.weight.rows() == l.weight.rows() && lg.weight.cols() == l.weight.cols(), "adam: moment shape mismatch");
        lg.bias = vector_from_json(field(j[i], "bias"), l.bias.size(), "bias moment");
        lg.gain = vector_from_json(field(j[i], "gain"), l.gain.size(), "gain moment");
        lg.shift = vector_from_json(field(j[i], "shift"), l.shift.size(), "shift moment");
        g.layers.push_back(std::move(lg));
    }
    return g;
}

}  // namespace

json to_json(const nn::AdamState& s) {
    return {{"learning_rate", s.config.learning_rate},
            {"beta1", s.config.beta1},
            {"beta2", s.config.beta2},
            {"epsilon", s.config.epsilon},
            {"step", s.step},
            {"first_moment", grads_to_json(s.first_moment)},
            {"second_moment", grads_to_json(s.second_moment)}};
}

nn::AdamState adam_from_json(const json& j, const nn::Network& net) {
    nn::AdamState s;
    s.config = {get<double>(j, "learning_rate"), get<double>(j, "beta1"), get<double>(j, "beta2"),
                get<double>(j, "epsilon")};
    s.step = get<std::int64_t>(j, "step");
    require(s.step >= 0, "adam: step must be >= 0");
    s.first_moment = grads_from_json(field(j, "first_moment"), net);
    s.second_moment = grads_from_json(field(j, "second_moment"), net);
    return s;
}

json to_json(const DlArchitecture& a) {
    return {{"variant", a.variant == DlVariant::kDlNbd ? "fas-dl-nbd" : "fas-e2e"},
            {"n_tx", a.n_tx},
            {"rx", a.rx},
            {"bits", a.bits},
            {"width", a.width},
            {"encoder_hidden", a.encoder_hidden},
            {"decoder_hidden", a.decoder_hidden}};
}

DlArchitecture architecture_from_json(const json& j) {
    DlArchitecture a;
    const auto v = get<std::string>(j, "variant");
    require(v == "fas-dl-nbd" || v == "fas-e2e", "architecture: unknown variant '" + v + "'");
    a.variant = v == "fas-dl-nbd" ? DlVariant::kDlNbd : DlVariant::kE2e;
    a.n_tx = get<int>(j, "n_tx");
    a.rx = get<std::vector<int>>(j, "rx");
    a.bits = get<std::vector<int>>(j, "bits");
    a.width = get<int>(j, "width");
    a.encoder_hidden = get<int>(j, "encoder_hidden");
    a.decoder_hidden = get<int>(j, "decoder_hidden");
    a.validate();
    return a;
}

json to_json(const DlSystem& sys) {
    json doc = header("dl-model");
    doc["architecture"] = to_json(sys.arch);
    doc["p_t"] = sys.p_t;
    doc["channel_fingerprint"] = sys.channel_fingerprint;
    doc["precoder_fingerprint"] = sys.precoder_fingerprint;
    doc["loss_weights"] = vector_to_json(sys.loss_weights.weights);
    auto nets = [](const std::vector<nn::Network>& n, const std::vector<nn::AdamState>& o) {
        json out = json::array();
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back({{"network", to_json(n[i])}, {"adam", to_json(o[i])}});
        return out;
    };
    doc["encoders"] = nets(sys.encoders, sys.encoder_opt);
    doc["decoders"] = nets(sys.decoders, sys.decoder_opt);
    if (!sys.transmitter.layers.empty()) {
        doc["transmitter"] = nets({sys.transmitter}, sys.transmitter_opt);
    }
    return doc;
}

DlSystem dl_system_from_json(const json& j, const ChannelRealization& channel, const PrecoderSet* precoders) {
    check_version(j, "dl-model");
    const DlArchitecture arch = architecture_from_json(field(j, "architecture"));
    DlSystem sys = build(arch, channel, arch.variant == DlVariant::kDlNbd ? precoders : nullptr, get<double>(j, "p_t"), 0);
    require(get<std::uint64_t>(j, "channel_fingerprint") == sys.channel_fingerprint,
            "checkpoint was trained on a different channel");
    require(get<std::uint64_t>(j, "precoder_fingerprint") == sys.precoder_fingerprint,
            "checkpoint was trained with a different precoder");
    sys.loss_weights.weights =
        vector_from_json(field(j, "loss_weights"), arch.user_count(), "loss_weights");
    sys.loss_weights.validate();

    auto load = [](const json& list, std::vector<nn::Network>& nets, std::vector<nn::AdamState>& opts) {
        require(list.is_array() && list.size() == nets.size(), "checkpoint: network count mismatch");
        for (std::size_t i = 0; i < nets.size(); ++i) {
            nn::Network n = network_from_json(field(list[i], "network"));
            require(n.specs() == nets[i].specs(), "checkpoint: layer shapes do not match the architecture");
            opts[i] = adam_from_json(field(list[i], "adam"), n);
            nets[i] = std::move(n);
        }
    };
    load(field(j, "encoders"), sys.encoders, sys.encoder_opt);
    load(field(j, "decoders"), sys.decoders, sys.decoder_opt);
    if (arch.variant == DlVariant::kE2e) {
        std::vector<nn::Network> t{sys.transmitter};
        load(field(j, "transmitter"), t, sys.transmitter_opt);
        sys.transmitter = std::move(t.front());
    }
    return sys;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void save_json(const std::string& path, const json& j) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(1) << '\n';
}

}  // namespace mulma::io
