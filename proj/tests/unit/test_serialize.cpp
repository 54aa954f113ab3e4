#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "mulma/channel.hpp"
#include "mulma/codebook.hpp"
#include "mulma/dlnbd.hpp"
#include "mulma/errors.hpp"
#include "mulma/precoding.hpp"
#include "mulma/serialize.hpp"

using namespace mulma;

TEST_SUITE("serialize") {
    TEST_CASE("matrices round trip exactly") {
        const CMatrix c = testing::random_complex(3, 5, 1);
        CHECK(io::cmatrix_from_json(io::to_json(c)) == c);
        const RMatrix r = testing::random_real(4, 2, 2);
        CHECK(io::rmatrix_from_json(io::to_json(r)) == r);
        CHECK_THROWS_AS(io::cmatrix_from_json(io::json::array({io::json::array({1.0})})), ConfigError);
    }

    TEST_CASE("channels round trip") {
        const ChannelRealization h = generate({6, {2, 3}, 3, 0.5, 4});
        const ChannelRealization back = io::channel_from_json(io::to_json(h));
        REQUIRE(back.user_count() == 2);
        CHECK(back.h[1] == h.h[1]);
        CHECK(back.config.seed == 4);
        CHECK(back.rays[0][2].departure == h.rays[0][2].departure);
        io::json wrong = io::to_json(h);
        wrong["kind"] = "codebook";
        CHECK_THROWS_AS(io::channel_from_json(wrong), ConfigError);
    }

    TEST_CASE("codebooks round trip and are validated on load") {
        const Codebook cb = build_pmh(3, 2.0, PmhBuildParams::defaults(3, 1));
        const Codebook back = io::codebook_from_json(io::to_json(cb));
        CHECK(back.n_bits == 3);
        for (std::size_t i = 0; i < cb.size(); ++i) CHECK(back.codewords[i] == cb.codewords[i]);
        Codebook dup = cb;
        dup.codewords[1] = dup.codewords[0];
        CHECK_THROWS_AS(io::codebook_from_json(io::to_json(dup)), ConfigError);
    }

    TEST_CASE("precoders round trip") {
        const ChannelRealization h = generate({8, {2, 2}, 3, 0.5, 4});
        const PrecoderSet p = fas_nbd(h.h, std::vector<int>{2, 2});
        const PrecoderSet back = io::precoders_from_json(io::to_json(p));
        CHECK(back.mode == Structure::kFas);
        CHECK(back.composite == p.composite);
        CHECK(back.combiners[1] == p.combiners[1]);
        CHECK(back.singular_values[0] == p.singular_values[0]);
    }

    TEST_CASE("learned systems round trip through a file") {
        const ChannelRealization h = generate({6, {2, 2}, 3, 0.5, 7});
        const PrecoderSet p = fas_nbd(h.h, std::vector<int>{2, 2});
        TrainParams tp;
        tp.width = 8;
        tp.encoder_hidden = 1;
        tp.decoder_hidden = 1;
        tp.epochs = 2;
        tp.samples = 40;
        tp.batch_size = 20;
        const DlArchitecture a = make_architecture(DlVariant::kDlNbd, h.config, std::vector<int>{2, 2}, tp);
        DlSystem sys = build(a, h, &p, 6.0, 3);
        train(sys, tp, make_training_data(a.bits, tp.samples, 1));

        const auto path = std::filesystem::temp_directory_path() / "mulma-test-model.json";
        io::save_json(path.string(), io::to_json(sys));
        const DlSystem back = io::dl_system_from_json(io::load_json(path.string()), h, &p);
        CHECK(back.encoders[1].layers[0].running_mean == sys.encoders[1].layers[0].running_mean);
        CHECK(back.decoders[0].layers[1].weight == sys.decoders[0].layers[1].weight);
        CHECK(back.encoder_opt[0].step == sys.encoder_opt[0].step);
        CHECK(back.loss_weights.weights == sys.loss_weights.weights);

        const auto bits = make_training_data(a.bits, 16, 5);
        Rng rng(2);
        const auto noise = draw_noise(a, 16, 0.1, rng);
        CHECK(infer_link(back, bits, noise).predictions[0] == infer_link(sys, bits, noise).predictions[0]);

        const ChannelRealization other = generate({6, {2, 2}, 3, 0.5, 8});
        const PrecoderSet po = fas_nbd(other.h, std::vector<int>{2, 2});
        CHECK_THROWS_AS(io::dl_system_from_json(io::load_json(path.string()), other, &po), ConfigError);
        std::filesystem::remove(path);
    }

    TEST_CASE("missing files are configuration errors") {
        CHECK_THROWS_AS(io::load_json("/nonexistent/mulma.json"), ConfigError);
    }
}
