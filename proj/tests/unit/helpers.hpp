#pragma once

#include <cstdint>
#include <random>

#include "mulma/numerics.hpp"

namespace testing {

inline mulma::CMatrix random_complex(mulma::Index rows, mulma::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    mulma::CMatrix m(rows, cols);
    for (mulma::Index j = 0; j < cols; ++j)
        for (mulma::Index i = 0; i < rows; ++i) m(i, j) = {n(rng), n(rng)};
    return m;
}

inline mulma::RMatrix random_real(mulma::Index rows, mulma::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    return mulma::RMatrix::NullaryExpr(rows, cols, [&] { return n(rng); });
}

inline double rel_error(const mulma::CMatrix& a, const mulma::CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace testing
