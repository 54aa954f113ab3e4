#include <benchmark/benchmark.h>

#include <mulma/channel.hpp>
#include <mulma/codebook.hpp>
#include <mulma/dlnbd.hpp>
#include <mulma/link.hpp>
#include <mulma/numerics.hpp>
#include <mulma/precoding.hpp>
#include <mulma/rng.hpp>

#include <vector>

using namespace mulma;

namespace {

struct Fixture {
    ChannelRealization channel;
    PrecoderSet precoders;
    std::vector<Codebook> codebooks;
    std::vector<Bits> bits;
    CVector y;
};

Fixture make_fixture(int nk) {
    Fixture f;
    f.channel = generate(ChannelConfig{16, {6, 6}, 3, 0.5, 5});
    const std::vector<int> nb{nk, nk};
    f.precoders = fas_nbd(f.channel.h, nb);
    const double p_t = 16.0;
    for (int k = 0; k < 2; ++k) {
        f.codebooks.push_back(build_pmh(nk, p_t * nk / (2.0 * nk), PmhBuildParams::defaults(nk, 5 + k)));
        f.bits.push_back(index_to_bits(static_cast<std::size_t>(k), nk));
    }
    const TxFrame tx = modulate(f.bits, f.codebooks, f.precoders, p_t);
    Rng rng(7);
    f.y = transmit(tx.x, f.channel.h[0], noise_variance(10.0), rng);
    return f;
}

void BM_MlDetect(benchmark::State& state) {
    const Fixture f = make_fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ml_detect_index(f.y, f.precoders.combiners[0], f.channel.h[0],
                                                 f.precoders.blocks[0], f.codebooks[0]));
    }
    state.counters["candidates"] = static_cast<double>(f.codebooks[0].size());
}
BENCHMARK(BM_MlDetect)->DenseRange(1, 6);

void BM_MlDetectCached(benchmark::State& state) {
    const Fixture f = make_fixture(static_cast<int>(state.range(0)));
    const MlDetector det(f.precoders.combiners[0], f.channel.h[0], f.precoders.blocks[0], f.codebooks[0]);
    for (auto _ : state) benchmark::DoNotOptimize(det.detect(f.y));
}
BENCHMARK(BM_MlDetectCached)->DenseRange(1, 6);

void BM_DecoderInference(benchmark::State& state) {
    const int nk = static_cast<int>(state.range(0));
    const std::vector<int> nb{nk, nk};
    ChannelConfig cfg{16, {6, 6}, 3, 0.5, 5};
    const ChannelRealization channel = generate(cfg);
    const PrecoderSet precoders = fas_nbd(channel.h, nb);
    TrainParams params = TrainParams::preset("IV");
    params.epochs = 0;
    const DlArchitecture arch = make_architecture(DlVariant::kDlNbd, cfg, nb, params);
    const DlSystem sys = build(arch, channel, &precoders, 16.0, 5);
    const std::vector<RMatrix> frames = make_training_data(nb, 1, 9);
    Rng rng(3);
    const std::vector<RMatrix> noise = draw_noise(arch, 1, noise_variance(10.0), rng);
    for (auto _ : state) benchmark::DoNotOptimize(infer_link(sys, frames, noise));
}
BENCHMARK(BM_DecoderInference)->DenseRange(1, 6);

void BM_Svd(benchmark::State& state) {
    const Index n = state.range(0);
    Rng rng(1);
    CMatrix a(n, n);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = complex_normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(BM_Svd)->RangeMultiplier(2)->Range(8, 64);

void BM_FasNbd(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const ChannelRealization channel = generate(ChannelConfig{36, std::vector<int>(k, 2), 3, 0.5, 9});
    const std::vector<int> nb(k, 2);
    for (auto _ : state) benchmark::DoNotOptimize(fas_nbd(channel.h, nb));
}
BENCHMARK(BM_FasNbd)->DenseRange(2, 6);

}  // namespace
BENCHMARK_MAIN();
