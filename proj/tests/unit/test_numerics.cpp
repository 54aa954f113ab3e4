#include <doctest.h>

#include "helpers.hpp"
#include "mulma/errors.hpp"
#include "mulma/numerics.hpp"

using namespace mulma;

TEST_SUITE("numerics") {
    TEST_CASE("svd of the identity") {
        const SvdResult r = svd(CMatrix::Identity(3, 3));
        CHECK((r.singular_values - RVector::Ones(3)).norm() < 1e-14);
        CHECK((r.u * r.v.adjoint() - CMatrix::Identity(3, 3)).norm() < 1e-12);
    }

    TEST_CASE("svd of a rank-one outer product") {
        CVector u = testing::random_complex(4, 1, 1).col(0).normalized();
        CVector v = testing::random_complex(3, 1, 2).col(0).normalized();
        const SvdResult r = svd(u * v.adjoint());
        CHECK(r.singular_values(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.singular_values(1) < 1e-12);
        CHECK(r.singular_values(2) < 1e-12);
    }

    TEST_CASE("svd round trip over random shapes") {
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<int> dim(1, 32);
        for (int t = 0; t < 1000; ++t) {
            const int m = dim(rng);
            const int n = dim(rng);
            const CMatrix a = testing::random_complex(m, n, 100 + t);
            const SvdResult r = svd(a);
            REQUIRE(r.u.rows() == m);
            REQUIRE(r.v.rows() == n);
            CHECK(testing::rel_error(r.reconstruct(), a) <= 1e-10);
            CHECK(orthonormality_residual(r.u) <= 1e-10 * m);
            CHECK(orthonormality_residual(r.v) <= 1e-10 * n);
            for (Index i = 1; i < r.singular_values.size(); ++i) {
                CHECK(r.singular_values(i) <= r.singular_values(i - 1));
            }
            CHECK(r.singular_values.minCoeff() >= 0.0);
        }
    }

    TEST_CASE("svd rejects non-finite input") {
        CMatrix a = CMatrix::Identity(2, 2);
        a(0, 1) = cd(std::nan(""), 0.0);
        CHECK_THROWS_AS(svd(a), NumericalError);
        CHECK_THROWS_AS(svd(CMatrix(0, 3)), DimensionError);
    }

    TEST_CASE("null space of [1, 0] is the second axis") {
        CMatrix a(1, 2);
        a << 1.0, 0.0;
        const CMatrix b = null_space_basis(a);
        REQUIRE(b.cols() == 1);
        CHECK(std::abs(b(0, 0)) < 1e-14);
        CHECK(std::abs(b(1, 0)) == doctest::Approx(1.0));
        CHECK((a * b).norm() < 1e-14);
    }

    TEST_CASE("null space of a random fat matrix") {
        for (int t = 0; t < 50; ++t) {
            const CMatrix a = testing::random_complex(2, 5, 300 + t);
            const CMatrix b = null_space_basis(a);
            REQUIRE(b.cols() == 3);
            CHECK((a * b).norm() <= 1e-9 * a.norm());
            CHECK(orthonormality_residual(b) <= 1e-10);
        }
    }

    TEST_CASE("null space keeps the column count on degenerate input") {
        const CMatrix b = null_space_basis(CMatrix::Zero(1, 3));
        CHECK(b.cols() == 2);
        CHECK(orthonormality_residual(b) <= 1e-10);
    }

    TEST_CASE("null space needs a fat matrix") {
        CHECK_THROWS_AS(null_space_basis(testing::random_complex(3, 3, 1)), DimensionError);
        CHECK_THROWS_AS(null_space_basis(testing::random_complex(4, 2, 1)), DimensionError);
    }

    TEST_CASE("random semi-unitary matrices") {
        const CMatrix q = random_semi_unitary(2, 2, 5);
        CHECK((q.adjoint() * q - CMatrix::Identity(2, 2)).norm() <= 1e-10);
        CHECK((q * q.adjoint() - CMatrix::Identity(2, 2)).norm() <= 1e-10);
        const CMatrix b = random_semi_unitary(6, 2, 9);
        CHECK(b.rows() == 6);
        CHECK(b.cols() == 2);
        CHECK((b.adjoint() * b - CMatrix::Identity(2, 2)).norm() <= 1e-10);
        CHECK(random_semi_unitary(6, 2, 9) == b);
        CHECK(random_semi_unitary(6, 2, 10) != b);
        CHECK_THROWS_AS(random_semi_unitary(2, 3, 1), DimensionError);
    }

    TEST_CASE("real embedding matches complex products") {
        const CMatrix a = testing::random_complex(3, 4, 11);
        const CVector v = testing::random_complex(4, 1, 12).col(0);
        const RVector lhs = real_embedding(a) * to_real_block(v);
        CHECK((lhs - to_real_block(a * v)).norm() < 1e-12);
        CHECK((from_real_block(to_real_block(v)) - v).norm() == 0.0);
        const RVector block = to_real_block(v);
        CHECK(block(0) == v(0).real());
        CHECK(block(4) == v(0).imag());
    }
}
