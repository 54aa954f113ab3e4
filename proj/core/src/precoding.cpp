#include "mulma/precoding.hpp"

#include <cmath>
#include <numeric>

#include "mulma/errors.hpp"
#include "mulma/rng.hpp"

namespace mulma {
namespace {

std::string user_tag(std::size_t k) {
    return " (user " + std::to_string(k) + ")";
}

CMatrix stack_others(std::span<const CMatrix> channels, std::size_t k, Index col0, Index ncols) {
    Index rows = 0;
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (i != k) rows += channels[i].rows();
    CMatrix out(rows, ncols);
    Index r = 0;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (i == k) continue;
        out.middleRows(r, channels[i].rows()) = channels[i].middleCols(col0, ncols);
        r += channels[i].rows();
    }
    return out;
}

CMatrix concat_blocks(const std::vector<CMatrix>& blocks, Index n_tx) {
    Index cols = 0;
    for (const auto& b : blocks) cols += b.cols();
    CMatrix out(n_tx, cols);
    Index c = 0;
    for (const auto& b : blocks) {
        out.middleCols(c, b.cols()) = b;
        c += b.cols();
    }
    return out;
}

void check_channels(std::span<const CMatrix> channels) {
    if (channels.empty()) throw ConfigError("precoding: no user channels");
    for (const auto& hk : channels) {
        require_valid(hk, "precoding");
        if (hk.cols() != channels.front().cols()) throw DimensionError("precoding: users disagree on N_T");
    }
}

}  // namespace

std::string_view to_string(Structure s) {
    return s == Structure::kFas ? "FAS" : "SAS";
}

Feasibility validate_dims(const ChannelConfig& config, std::span<const int> bits, Structure mode) {
    Feasibility f;
    f.mode = mode;
    auto fail = [&](std::string what) { f.violated_constraints.push_back(std::move(what)); };

    const int k_users = config.user_count();
    if (k_users < 1) fail("K >= 1");
    if (static_cast<int>(bits.size()) != k_users) fail("one n_k per user");
    const int n_rx = config.total_rx();
    const std::size_t common = std::min<std::size_t>(bits.size(), config.users.size());
    for (std::size_t k = 0; k < bits.size(); ++k)
        if (bits[k] < 1) fail("n_k >= 1" + user_tag(k));

    if (mode == Structure::kFas) {
        if (n_rx > config.n_tx) fail("N_R <= N_T");
        for (std::size_t k = 0; k < common; ++k)
            if (bits[k] > config.users[k]) fail("n_k <= N_Rk" + user_tag(k));
    } else if (k_users >= 1) {
        if (config.n_tx % k_users != 0) {
            fail("N_T/K integer");
        } else if (n_rx > config.n_tx / k_users) {
            fail("N_R <= N_T/K");
        }
        for (std::size_t k = 0; k < common; ++k)
            if (bits[k] != config.users[k]) fail("n_k == N_Rk" + user_tag(k));
    }
    f.ok = f.violated_constraints.empty();
    return f;
}

void require_feasible(const ChannelConfig& config, std::span<const int> bits, Structure mode) {
    const Feasibility f = validate_dims(config, bits, mode);
    if (f.ok) return;
    std::string msg = std::string(to_string(mode)) + " dimension constraints violated:";
    for (const auto& c : f.violated_constraints) msg += " [" + c + "]";
    throw InfeasibleError(msg);
}

ChannelConfig shape_of(std::span<const CMatrix> channels) {
    ChannelConfig c;
    c.n_tx = channels.empty() ? 0 : static_cast<int>(channels.front().cols());
    for (const auto& hk : channels) c.users.push_back(static_cast<int>(hk.rows()));
    return c;
}

PrecoderSet fas_nbd(std::span<const CMatrix> channels, std::span<const int> bits) {
    check_channels(channels);
    require_feasible(shape_of(channels), bits, Structure::kFas);
    const Index n_tx = channels.front().cols();

    PrecoderSet p;
    p.mode = Structure::kFas;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        const CMatrix null_basis = channels.size() == 1
                                       ? CMatrix(CMatrix::Identity(n_tx, n_tx))
                                       : null_space_basis(stack_others(channels, k, 0, n_tx));
        const SvdResult eq = svd(channels[k] * null_basis);
        const Index nk = bits[k];
        p.blocks.push_back(null_basis * eq.v.leftCols(nk));
        p.combiners.push_back(eq.u.leftCols(nk).adjoint());
        p.singular_values.push_back(eq.singular_values.head(nk));
    }
    p.composite = concat_blocks(p.blocks, n_tx);
    return p;
}

PrecoderSet sas_precode(std::span<const CMatrix> channels, std::span<const int> bits, std::uint64_t seed) {
    check_channels(channels);
    const ChannelConfig shape = shape_of(channels);
    require_feasible(shape, bits, Structure::kSas);
    const Index n_tx = shape.n_tx;
    const Index block = n_tx / shape.user_count();

    PrecoderSet p;
    p.mode = Structure::kSas;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        const Index col0 = static_cast<Index>(k) * block;
        const CMatrix null_basis = channels.size() == 1
                                       ? CMatrix(CMatrix::Identity(block, block))
                                       : null_space_basis(stack_others(channels, k, col0, block));
        const Index nk = bits[k];
        const CMatrix rotation =
            random_semi_unitary(null_basis.cols(), nk, derive_seed(seed, {stream::kSas, k}));
        CMatrix tk = CMatrix::Zero(n_tx, nk);
        tk.middleRows(col0, block) = null_basis * rotation;

        CMatrix wk = CMatrix::Zero(nk, channels[k].rows());
        wk.leftCols(nk).setIdentity();
        const Eigen::JacobiSVD<CMatrix> eff(channels[k] * tk);
        p.singular_values.push_back(eff.singularValues().head(nk));
        p.blocks.push_back(std::move(tk));
        p.combiners.push_back(std::move(wk));
    }
    p.composite = concat_blocks(p.blocks, n_tx);
    return p;
}

int null_dim(const ChannelConfig& config, std::span<const int> bits, Structure mode, int k) {
    require_feasible(config, bits, mode);
    if (k < 0 || k >= config.user_count()) throw ConfigError("null_dim: user index out of range");
    const int others = config.total_rx() - config.users[k];
    const int available = mode == Structure::kFas ? config.n_tx : config.n_tx / config.user_count();
    return available - others;
}

int max_users(int n_tx, int n_rx_per_user, Structure mode) {
    if (n_tx < 1 || n_rx_per_user < 1) throw ConfigError("max_users: counts must be positive");
    const int ratio = n_tx / n_rx_per_user;
    if (mode == Structure::kFas) return ratio;
    int k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_tx) / n_rx_per_user)));
    while ((k + 1) * (k + 1) * n_rx_per_user <= n_tx) ++k;
    while (k > 0 && k * k * n_rx_per_user > n_tx) --k;
    return k;
}

double max_interference_ratio(std::span<const CMatrix> channels, const PrecoderSet& p) {
    double worst = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        for (std::size_t i = 0; i < p.blocks.size(); ++i) {
            if (i == k) continue;
            const double denom = channels[k].norm() * p.blocks[i].norm();
            if (denom == 0.0) continue;
            worst = std::max(worst, (channels[k] * p.blocks[i]).norm() / denom);
        }
    }
    return worst;
}

}  // namespace mulma
