#include <doctest.h>

#include <cmath>
#include <vector>

#include "mulma/channel.hpp"
#include "mulma/dlnbd.hpp"
#include "mulma/errors.hpp"
#include "mulma/link.hpp"
#include "mulma/precoding.hpp"

using namespace mulma;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

struct Toy {
    ChannelRealization channel;
    PrecoderSet precoders;
    DlArchitecture arch;
};

Toy make_toy(DlVariant variant, int n_tx, std::vector<int> rx, std::vector<int> bits, int width, std::uint64_t seed) {
    Toy t;
    t.channel = generate({n_tx, rx, 3, 0.5, seed});
    t.precoders = fas_nbd(t.channel.h, bits);
    TrainParams p;
    p.width = width;
    p.encoder_hidden = 2;
    p.decoder_hidden = 2;
    t.arch = make_architecture(variant, t.channel.config, bits, p);
    return t;
}

DlSystem build_toy(const Toy& t, std::uint64_t seed) {
    return build(t.arch, t.channel, t.arch.variant == DlVariant::kDlNbd ? &t.precoders : nullptr, t.arch.n_tx, seed);
}

}  // namespace

TEST_SUITE("dlnbd") {
    TEST_CASE("set I layer dimensions") {
        const TrainParams p = TrainParams::preset("I");
        CHECK(p.users == 2);
        CHECK(p.samples == 1000);
        CHECK(p.epochs == 200);
        const ChannelConfig c{8, {2, 2}, 3, 0.5, 1};
        const DlArchitecture a = make_architecture(DlVariant::kDlNbd, c, std::vector<int>{2, 2}, p);
        const auto enc = a.encoder_specs(0);
        REQUIRE(enc.size() == 4);
        CHECK(enc[0] == LayerSpec{LayerKind::kDenseBnRelu, 2, 128});
        CHECK(enc[1] == LayerSpec{LayerKind::kDenseBnRelu, 128, 128});
        CHECK(enc[2] == LayerSpec{LayerKind::kDenseBnRelu, 128, 128});
        CHECK(enc[3] == LayerSpec{LayerKind::kDense, 128, 4});
        const auto dec = a.decoder_specs(1);
        REQUIRE(dec.size() == 3);
        CHECK(dec[0] == LayerSpec{LayerKind::kDenseBnRelu, 4, 128});
        CHECK(dec[1] == LayerSpec{LayerKind::kDenseBnRelu, 128, 128});
        CHECK(dec[2] == LayerSpec{LayerKind::kDense, 128, 2});

        const ChannelRealization h = generate(c);
        const PrecoderSet f = fas_nbd(h.h, std::vector<int>{2, 2});
        const DlSystem sys = build(a, h, &f, 8.0, 3);
        CHECK(sys.encoders.size() == 2);
        CHECK(sys.decoders.size() == 2);
        CHECK(sys.encoders[0].parameter_count() == (2 * 128 + 256) + 2 * (128 * 128 + 256) + (128 * 4 + 4));
        CHECK(sys.decoders[0].parameter_count() == (4 * 128 + 256) + (128 * 128 + 256) + (128 * 2 + 2));
        CHECK(sys.transmitter.layers.empty());
    }

    TEST_CASE("presets") {
        CHECK(TrainParams::preset("II").users == 3);
        CHECK(TrainParams::preset("III").users == 4);
        CHECK(TrainParams::preset("IV").epochs == 400);
        CHECK(TrainParams::preset("II").samples == 10000);
        CHECK_THROWS_AS(TrainParams::preset("V"), ConfigError);
        TrainParams bad = TrainParams::preset("I");
        bad.snr_max_db = -1.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }

    TEST_CASE("end-to-end transmitter dimensions") {
        const ChannelConfig c{8, {2, 2}, 3, 0.5, 1};
        const DlArchitecture a = make_architecture(DlVariant::kE2e, c, std::vector<int>{2, 2}, TrainParams::preset("I"));
        const auto tx = a.transmitter_specs();
        REQUIRE(tx.size() == 5);
        CHECK(tx[0] == LayerSpec{LayerKind::kDenseBnRelu, 4, 8});
        CHECK(tx[1] == LayerSpec{LayerKind::kDenseBnRelu, 8, 128});
        CHECK(tx.back() == LayerSpec{LayerKind::kDense, 128, 16});
        const DlSystem sys = build(a, generate(c), nullptr, 8.0, 1);
        CHECK(sys.encoders.empty());
        CHECK(sys.transmitter.out_dim() == 16);
        const PrecoderSet f = fas_nbd(generate(c).h, std::vector<int>{2, 2});
        CHECK_THROWS_AS(build(a, generate(c), &f, 8.0, 1), ConfigError);
    }

    TEST_CASE("build is deterministic and checks dimensions") {
        const Toy t = make_toy(DlVariant::kDlNbd, 6, {2, 2}, {2, 2}, 8, 4);
        const DlSystem a = build_toy(t, 11);
        const DlSystem b = build_toy(t, 11);
        CHECK(a.encoders[1].layers[0].weight == b.encoders[1].layers[0].weight);
        CHECK(a.decoders[0].layers[1].weight == b.decoders[0].layers[1].weight);
        CHECK(build_toy(t, 12).encoders[1].layers[0].weight != a.encoders[1].layers[0].weight);
        CHECK_THROWS_AS(build(t.arch, t.channel, nullptr, 6.0, 1), ConfigError);
        const ChannelRealization other = generate({6, {2, 3}, 3, 0.5, 4});
        CHECK_THROWS_AS(build(t.arch, other, &t.precoders, 6.0, 1), DimensionError);
    }

    TEST_CASE("bits are zero-centred") {
        const std::vector<Bits> frames{Bits{1, 0}, Bits{0, 0}};
        const RMatrix c = centre_bits(frames);
        REQUIRE(c.rows() == 2);
        REQUIRE(c.cols() == 2);
        CHECK(c(0, 0) == 0.5);
        CHECK(c(1, 0) == -0.5);
        CHECK(c(0, 1) == -0.5);
        CHECK(decide(c) == frames);
    }

    TEST_CASE("transmit power is exact in every mode") {
        for (DlVariant v : {DlVariant::kDlNbd, DlVariant::kE2e}) {
            const Toy t = make_toy(v, 6, {2, 2}, {2, 1}, 8, 7);
            DlSystem sys = build_toy(t, 2);
            const auto bits = make_training_data(t.arch.bits, 32, 5);
            Rng rng(1);
            const auto noise = draw_noise(t.arch, 32, 0.1, rng);
            for (nn::Mode m : {nn::Mode::kTrain, nn::Mode::kInfer}) {
                const LinkOutput out = forward_link(sys, bits, noise, m);
                for (Index j = 0; j < out.x.cols(); ++j)
                    CHECK(std::abs(out.x.col(j).squaredNorm() - 6.0) <= 1e-12 * 6.0);
                CHECK(out.predictions[1].rows() == 1);
                CHECK(out.received[0].rows() == 4);
            }
            const LinkOutput inf = infer_link(sys, bits, noise);
            CHECK((inf.x.colwise().squaredNorm().array() - 6.0).abs().maxCoeff() <= 1e-11);
        }
    }

    TEST_CASE("hand-set single-user chain loops back") {
        const ChannelRealization h = generate({1, {1}, 3, 0.5, 9});
        const PrecoderSet f = fas_nbd(h.h, std::vector<int>{1});
        TrainParams p;
        p.width = 4;
        p.encoder_hidden = 0;
        p.decoder_hidden = 0;
        const DlArchitecture a = make_architecture(DlVariant::kDlNbd, h.config, std::vector<int>{1}, p);
        DlSystem sys = build(a, h, &f, 1.0, 1);
        REQUIRE(sys.encoders[0].layers.size() == 1);
        sys.encoders[0].layers[0].weight << 1.0, 0.0;
        sys.encoders[0].layers[0].bias.setZero();
        RVector unit(2);
        unit << 1.0, 0.0;
        const RVector g = sys.channel[0] * sys.precoder[0] * unit;
        sys.decoders[0].layers[0].weight = 0.5 * g.transpose() / g.squaredNorm();
        sys.decoders[0].layers[0].bias.setZero();

        RMatrix u(1, 2);
        u << 0.5, -0.5;
        const std::vector<RMatrix> bits{u};
        const std::vector<RMatrix> noise{RMatrix::Zero(2, 2)};
        const LinkOutput out = infer_link(sys, bits, noise);
        CHECK((out.predictions[0] - u).norm() <= 1e-12);
        CHECK(count_errors(sys, bits, noise) == 0);
    }

    TEST_CASE("end-to-end gradients match finite differences") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            for (DlVariant v : {DlVariant::kDlNbd, DlVariant::kE2e}) {
                const Toy t = make_toy(v, 6, {2, 2}, {2, 2}, 6, seed);
                const DlSystem sys = build_toy(t, seed);
                const auto bits = make_training_data(t.arch.bits, 16, seed + 100);
                Rng rng(seed);
                const auto noise = draw_noise(t.arch, 16, 0.05, rng);
                CHECK(link_grad_check(sys, bits, noise) <= 1e-4);
            }
        }
    }

    TEST_CASE("zero epochs leave the model unchanged") {
        const Toy t = make_toy(DlVariant::kDlNbd, 6, {2, 2}, {2, 2}, 8, 3);
        DlSystem sys = build_toy(t, 1);
        const DlSystem before = sys;
        TrainParams p;
        p.epochs = 0;
        p.samples = 100;
        p.batch_size = 50;
        const TrainReport r = train(sys, p, make_training_data(t.arch.bits, 100, 1));
        CHECK(r.epoch_loss.empty());
        CHECK(sys.encoders[0].layers[0].weight == before.encoders[0].layers[0].weight);
        CHECK(sys.decoders[1].layers[2].bias == before.decoders[1].layers[2].bias);
    }

    TEST_CASE("short training reduces the loss and is reproducible") {
        const Toy t = make_toy(DlVariant::kDlNbd, 6, {2, 2}, {2, 2}, 16, 3);
        TrainParams p;
        p.width = 16;
        p.epochs = 30;
        p.samples = 400;
        p.batch_size = 50;
        p.seed = 8;
        const auto data = make_training_data(t.arch.bits, p.samples, 2);
        DlSystem a = build_toy(t, 1);
        DlSystem b = build_toy(t, 1);
        int calls = 0;
        const TrainReport ra = train(a, p, data, [&](int, double) { ++calls; });
        const TrainReport rb = train(b, p, data);
        CHECK(calls == 30);
        REQUIRE(ra.epoch_loss.size() == 30);
        CHECK(ra.epoch_loss == rb.epoch_loss);
        for (double l : ra.epoch_loss) {
            CHECK(std::isfinite(l));
            CHECK(l >= 0.0);
        }
        CHECK(ra.epoch_loss.back() < 0.5 * ra.epoch_loss.front());
        CHECK_NOTHROW(ra.final_weights.validate());

        const std::vector<double> snr{0.0, 15.0};
        const BerCurve c1 = evaluate(a, snr, 2000, 4);
        const BerCurve c2 = evaluate(a, snr, 2000, 4);
        CHECK(c1.ber() == c2.ber());
        CHECK(c1.points[0].bits == 2000u * 4u);
        CHECK(c1.points[1].ber() <= c1.points[0].ber());

        p.per_epoch_weights = true;
        p.epochs = 3;
        DlSystem c = build_toy(t, 1);
        CHECK_NOTHROW(train(c, p, data));
    }

    TEST_CASE("the frozen precoder still cancels interference") {
        const Toy t = make_toy(DlVariant::kDlNbd, 6, {2, 2}, {2, 2}, 8, 3);
        const DlSystem sys = build_toy(t, 1);
        for (int k = 0; k < 2; ++k) {
            const RMatrix leak = sys.channel[k] * sys.precoder[1 - k];
            CHECK(leak.norm() <= 1e-9 * sys.channel[k].norm() * sys.precoder[1 - k].norm());
        }
    }

    TEST_CASE("degenerate encodings are rejected") {
        const Toy t = make_toy(DlVariant::kDlNbd, 6, {2, 2}, {2, 2}, 8, 3);
        DlSystem sys = build_toy(t, 1);
        for (auto& e : sys.encoders) {
            e.layers.back().weight.setZero();
            e.layers.back().bias.setZero();
        }
        const auto bits = make_training_data(t.arch.bits, 4, 1);
        Rng rng(1);
        const auto noise = draw_noise(t.arch, 4, 0.0, rng);
        CHECK_THROWS_AS(infer_link(sys, bits, noise), NumericalError);
    }

    TEST_CASE("fingerprints distinguish channels") {
        const ChannelRealization a = generate({4, {2}, 3, 0.5, 1});
        const ChannelRealization b = generate({4, {2}, 3, 0.5, 2});
        CHECK(fingerprint(a.h) == fingerprint(a.h));
        CHECK(fingerprint(a.h) != fingerprint(b.h));
    }
}
