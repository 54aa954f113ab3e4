#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mulma/channel.hpp"
#include "mulma/codebook.hpp"
#include "mulma/errors.hpp"
#include "mulma/link.hpp"
#include "mulma/precoding.hpp"

using namespace mulma;

namespace {

struct Setup {
    std::vector<CMatrix> h;
    std::vector<int> bits;
    std::vector<Codebook> codebooks;
    PrecoderSet precoders;
    double p_t;
};

Setup make_setup(int n_tx, std::vector<int> rx, std::vector<int> bits, std::uint64_t seed, Structure mode) {
    Setup s;
    s.h = generate({n_tx, rx, 3, 0.5, seed}).h;
    s.bits = bits;
    s.p_t = n_tx;
    const auto powers = codeword_powers(bits, s.p_t);
    for (std::size_t k = 0; k < bits.size(); ++k)
        s.codebooks.push_back(build_pmh(bits[k], powers[k], PmhBuildParams::defaults(bits[k], 10 + bits[k])));
    s.precoders = mode == Structure::kFas ? fas_nbd(s.h, bits) : sas_precode(s.h, bits, seed);
    return s;
}

std::vector<Bits> random_bits(const std::vector<int>& bits, Rng& rng) {
    std::vector<Bits> out;
    for (int n : bits) {
        Bits b(n);
        for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
        out.push_back(b);
    }
    return out;
}

}  // namespace

TEST_SUITE("link") {
    TEST_CASE("noise variance convention") {
        CHECK(noise_variance(0.0) == 1.0);
        CHECK(noise_variance(10.0) == doctest::Approx(0.1));
        CHECK(noise_variance(kNoiselessSnr) == 0.0);
        CHECK(noise_variance(-10.0) == doctest::Approx(10.0));
    }

    TEST_CASE("codeword power split") {
        const auto p = codeword_powers(std::vector<int>{2, 2, 2}, 24.0);
        for (double v : p) CHECK(v == doctest::Approx(8.0));
        const auto q = codeword_powers(std::vector<int>{1, 3}, 8.0);
        CHECK(q[0] == doctest::Approx(2.0));
        CHECK(q[1] == doctest::Approx(6.0));
    }

    TEST_CASE("every frame carries exactly the total power") {
        const Setup s = make_setup(24, {2, 2, 2}, {2, 2, 2}, 3, Structure::kFas);
        Rng rng(5);
        double mean = 0.0;
        double sq = 0.0;
        const int frames = 10000;
        for (int i = 0; i < frames; ++i) {
            const TxFrame f = modulate(random_bits(s.bits, rng), s.codebooks, s.precoders, s.p_t);
            CHECK(std::abs(f.x.squaredNorm() - s.p_t) <= 1e-12 * s.p_t);
            CHECK(f.normalization > 0.0);
            mean += f.normalization;
            sq += f.normalization * f.normalization;
        }
        mean /= frames;
        const double stddev = std::sqrt(sq / frames - mean * mean);
        CHECK(stddev < 0.2);
        CHECK(std::abs(mean - 1.0) < 0.2);
    }

    TEST_CASE("unitary precoder leaves a full-power symbol unscaled") {
        const Setup s = make_setup(4, {4}, {4}, 8, Structure::kFas);
        REQUIRE(orthonormality_residual(s.precoders.composite) < 1e-10);
        const TxFrame f = modulate(std::vector<Bits>{Bits{1, 0, 1, 1}}, s.codebooks, s.precoders, s.p_t);
        CHECK(f.normalization == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("zero-norm precoded signal is rejected") {
        Setup s = make_setup(4, {2}, {2}, 8, Structure::kFas);
        s.precoders.composite.setZero();
        CHECK_THROWS_AS(modulate(std::vector<Bits>{Bits{0, 1}}, s.codebooks, s.precoders, s.p_t), NumericalError);
        CHECK_THROWS_AS(modulate(std::vector<Bits>{Bits{0, 1}}, s.codebooks, s.precoders, 0.0), ConfigError);
    }

    TEST_CASE("noiseless transmission is a matrix product") {
        const CMatrix h = testing::random_complex(3, 5, 1);
        const CVector x = testing::random_complex(5, 1, 2);
        const CVector y = transmit(x, h, NoiseConfig{});
        CHECK((y - h * x).norm() == 0.0);
        CHECK_THROWS_AS(transmit(CVector(CVector::Zero(4)), h, NoiseConfig{}), DimensionError);
    }

    TEST_CASE("pure noise has the configured variance and is reproducible") {
        const CMatrix h = testing::random_complex(2000, 3, 1);
        const CVector x = CVector::Zero(3);
        const NoiseConfig n{7.0, 99};
        const CVector y = transmit(x, h, n);
        CHECK(y.squaredNorm() / 2000.0 == doctest::Approx(noise_variance(7.0)).epsilon(0.08));
        CHECK(transmit(x, h, n) == y);
    }

    TEST_CASE("detector returns the codeword whose image is received") {
        const Setup s = make_setup(6, {2, 2}, {2, 2}, 4, Structure::kFas);
        for (int k = 0; k < 2; ++k) {
            const CMatrix& w = s.precoders.combiners[k];
            const CMatrix& f = s.precoders.blocks[k];
            const MlDetector det(w, s.h[k], f, s.codebooks[k]);
            for (std::size_t j = 0; j < s.codebooks[k].size(); ++j) {
                const CVector y = s.h[k] * (f * s.codebooks[k].codewords[j]);
                CHECK(ml_detect_index(y, w, s.h[k], f, s.codebooks[k]) == j);
                CHECK(det.detect(y) == j);
                CHECK(ml_detect(y, w, s.h[k], f, s.codebooks[k]) == index_to_bits(j, 2));
            }
        }
    }

    TEST_CASE("ties resolve to the lowest index") {
        Codebook cb{1, 1.0, {CVector::Constant(1, cd(1, 0)), CVector::Constant(1, cd(-1, 0))}};
        const CMatrix one = CMatrix::Identity(1, 1);
        const CVector y = CVector::Zero(1);
        CHECK(ml_detect_index(y, one, one, one, cb) == 0);
        const MlDetector det(one, one, one, cb);
        CHECK(det.detect(y) == 0);
    }

    TEST_CASE("scaling the metric does not change decisions") {
        const Setup s = make_setup(8, {2, 2}, {2, 2}, 21, Structure::kFas);
        Rng rng(3);
        for (int i = 0; i < 200; ++i) {
            const CVector y = testing::random_complex(2, 1, 1000 + i);
            const CMatrix& w = s.precoders.combiners[0];
            const std::size_t a = ml_detect_index(y, w, s.h[0], s.precoders.blocks[0], s.codebooks[0]);
            const std::size_t b = ml_detect_index(y, CMatrix(3.5 * w), s.h[0], s.precoders.blocks[0], s.codebooks[0]);
            CHECK(a == b);
        }
    }

    TEST_CASE("exhaustive noiseless loopback") {
        for (Structure mode : {Structure::kFas, Structure::kSas}) {
            for (int nk = 1; nk <= 4; ++nk) {
                const Setup s = make_setup(mode == Structure::kFas ? 12 : 16, {nk, nk}, {nk, nk}, 60 + nk, mode);
                const std::size_t m = std::size_t{1} << nk;
                for (std::size_t a = 0; a < m; ++a) {
                    for (std::size_t b = 0; b < m; ++b) {
                        const std::vector<Bits> bits{index_to_bits(a, nk), index_to_bits(b, nk)};
                        const TxFrame f = modulate(bits, s.codebooks, s.precoders, s.p_t);
                        if (mode == Structure::kSas) CHECK(f.normalization == doctest::Approx(1.0).epsilon(1e-12));
                        for (int k = 0; k < 2; ++k) {
                            const CVector y = transmit(f.x, s.h[k], NoiseConfig{}) / f.normalization;
                            CHECK(ml_detect(y, s.precoders.combiners[k], s.h[k], s.precoders.blocks[k], s.codebooks[k]) ==
                                  bits[k]);
                        }
                    }
                }
            }
        }
    }

    TEST_CASE("unknown transmit scaling can flip noiseless decisions") {
        int errors = 0;
        for (std::uint64_t seed = 60; seed < 70; ++seed) {
            const Setup s = make_setup(12, {3, 3}, {3, 3}, seed, Structure::kFas);
            for (std::size_t a = 0; a < 8; ++a) {
                for (std::size_t b = 0; b < 8; ++b) {
                    const std::vector<Bits> bits{index_to_bits(a, 3), index_to_bits(b, 3)};
                    const TxFrame f = modulate(bits, s.codebooks, s.precoders, s.p_t);
                    const CVector y = transmit(f.x, s.h[0], NoiseConfig{});
                    if (ml_detect(y, s.precoders.combiners[0], s.h[0], s.precoders.blocks[0], s.codebooks[0]) != bits[0])
                        ++errors;
                }
            }
        }
        CHECK(errors > 0);
    }

    TEST_CASE("detection cost is one evaluation per codeword") {
        for (int nk = 1; nk <= 6; ++nk) {
            const Setup s = make_setup(8, {nk}, {nk}, 5, Structure::kFas);
            DetectionStats stats;
            ml_detect_index(CVector::Zero(nk), s.precoders.combiners[0], s.h[0], s.precoders.blocks[0], s.codebooks[0],
                            &stats);
            CHECK(stats.candidate_evaluations == (std::uint64_t{1} << nk));
        }
    }

    TEST_CASE("peak-to-average sum power") {
        const std::vector<CVector> two{CVector::Constant(1, cd(1, 0)), CVector::Constant(1, cd(std::sqrt(3.0), 0))};
        CHECK(paspr(two) == doctest::Approx(1.5));
        CHECK_THROWS_AS(paspr(std::span<const CVector>{}), ConfigError);

        const Setup s = make_setup(24, {2, 2, 2}, {2, 2, 2}, 9, Structure::kFas);
        Rng rng(1);
        std::vector<TxFrame> frames;
        std::vector<CVector> raw;
        for (int i = 0; i < 500; ++i) {
            frames.push_back(modulate(random_bits(s.bits, rng), s.codebooks, s.precoders, s.p_t));
            raw.push_back(frames.back().x / frames.back().normalization);
        }
        CHECK(std::abs(paspr(frames) - 1.0) <= 1e-10);
        CHECK(paspr(raw) > 1.0 + 1e-6);
    }
}
