#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mulma/codebook.hpp"
#include "mulma/errors.hpp"

using namespace mulma;

namespace {

Codebook random_spherical(int n_bits, double power, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Codebook cb{n_bits, power, {}};
    for (int i = 0; i < (1 << n_bits); ++i) {
        CVector t(n_bits);
        for (int d = 0; d < n_bits; ++d) t(d) = {g(rng), g(rng)};
        cb.codewords.push_back(t.normalized() * std::sqrt(power));
    }
    return cb;
}

}  // namespace

TEST_SUITE("codebook") {
    TEST_CASE("one bit gives a near-antipodal pair") {
        const Codebook cb = build_pmh(1, 1.0, PmhBuildParams::defaults(1, 3));
        REQUIRE(cb.size() == 2);
        CHECK(min_distance(cb) >= 1.95);
    }

    TEST_CASE("every codeword lies on the power sphere") {
        for (int n = 1; n <= 5; ++n) {
            for (double p : {0.5, 2.0, 8.0}) {
                const Codebook cb = build_pmh(n, p, PmhBuildParams::defaults(n, 11 + n));
                REQUIRE(cb.size() == std::size_t{1} << n);
                for (const CVector& t : cb.codewords) CHECK(std::abs(t.squaredNorm() - p) <= 1e-9 * p);
                CHECK(min_distance(cb) > 0.0);
                CHECK_NOTHROW(cb.validate());
            }
        }
    }

    TEST_CASE("clustered codebooks beat random spherical codes") {
        const Codebook cb = build_pmh(2, 2.0, PmhBuildParams::defaults(2, 5));
        std::vector<double> baseline;
        for (int s = 0; s < 100; ++s) baseline.push_back(min_distance(random_spherical(2, 2.0, 900 + s)));
        std::sort(baseline.begin(), baseline.end());
        CHECK(min_distance(cb) > baseline[4]);
        CHECK(min_distance(cb) >= baseline[50]);
    }

    TEST_CASE("maximin quality across sizes") {
        for (int n = 1; n <= 4; ++n) {
            const Codebook cb = build_pmh(n, 1.0, PmhBuildParams::defaults(n, 77));
            std::vector<double> baseline;
            for (int s = 0; s < 100; ++s) baseline.push_back(min_distance(random_spherical(n, 1.0, 5000 + 100 * n + s)));
            std::nth_element(baseline.begin(), baseline.begin() + 50, baseline.end());
            CHECK(min_distance(cb) >= baseline[50]);
        }
    }

    TEST_CASE("construction is deterministic") {
        const auto params = PmhBuildParams::defaults(3, 21);
        const Codebook a = build_pmh(3, 4.0, params);
        const Codebook b = build_pmh(3, 4.0, params);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.codewords[i] == b.codewords[i]);
    }

    TEST_CASE("minimum distance of hand-built codebooks") {
        Codebook pair{1, 1.0, {CVector::Constant(1, cd(1, 0)), CVector::Constant(1, cd(-1, 0))}};
        CHECK(min_distance(pair) == doctest::Approx(2.0));
        Codebook square{2, 1.0, {}};
        for (cd z : {cd(1, 0), cd(0, 1), cd(-1, 0), cd(0, -1)}) square.codewords.push_back(CVector::Constant(1, z));
        CHECK(min_distance(square) == doctest::Approx(std::sqrt(2.0)));
        Codebook dup{1, 1.0, {CVector::Constant(1, cd(1, 0)), CVector::Constant(1, cd(1, 0))}};
        CHECK(min_distance(dup) == 0.0);
        CHECK_THROWS_AS(dup.validate(), ConfigError);
        Codebook single{1, 1.0, {CVector::Constant(1, cd(1, 0))}};
        CHECK_THROWS_AS(min_distance(single), ConfigError);
    }

    TEST_CASE("bit labelling is natural binary, first bit most significant") {
        const Codebook cb = build_pmh(2, 1.0, PmhBuildParams::defaults(2, 1));
        CHECK(&encode_bits(cb, Bits{0, 0}) == &cb.codewords[0]);
        CHECK(&encode_bits(cb, Bits{1, 1}) == &cb.codewords[3]);
        CHECK(&encode_bits(cb, Bits{1, 0}) == &cb.codewords[2]);
        CHECK_THROWS_AS(encode_bits(cb, Bits{1}), DimensionError);
        for (int n = 1; n <= 6; ++n) {
            for (std::size_t i = 0; i < (std::size_t{1} << n); ++i) CHECK(bits_to_index(index_to_bits(i, n)) == i);
        }
    }

    TEST_CASE("invalid build parameters") {
        CHECK_THROWS_AS(build_pmh(0, 1.0, {1000, 10, 0}), ConfigError);
        CHECK_THROWS_AS(build_pmh(17, 1.0, {1000, 10, 0}), ConfigError);
        CHECK_THROWS_AS(build_pmh(2, 0.0, {1000, 10, 0}), ConfigError);
        CHECK_THROWS_AS(build_pmh(4, 1.0, {100, 10, 0}), ConfigError);
        CHECK_THROWS_AS(build_pmh(2, 1.0, {1000, 0, 0}), ConfigError);
        CHECK(PmhBuildParams::defaults(2, 0).sample_count == 1000);
        CHECK(PmhBuildParams::defaults(6, 0).sample_count == 4096);
    }
}
