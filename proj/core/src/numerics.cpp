#include "mulma/numerics.hpp"

#include <string>

#include "mulma/errors.hpp"
#include "mulma/rng.hpp"

namespace mulma {
namespace {

std::string dims(const CMatrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace

CMatrix SvdResult::reconstruct() const {
    CMatrix sigma = CMatrix::Zero(u.cols(), v.cols());
    for (Index i = 0; i < singular_values.size(); ++i) sigma(i, i) = singular_values(i);
    return u * sigma * v.adjoint();
}

bool all_finite(const CMatrix& a) {
    return a.allFinite();
}

void require_valid(const CMatrix& a, const char* what) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw DimensionError(std::string(what) + ": empty matrix " + dims(a));
    }
    if (!all_finite(a)) {
        throw NumericalError(std::string(what) + ": non-finite entries in " + dims(a) + " matrix");
    }
}

SvdResult svd(const CMatrix& a) {
    require_valid(a, "svd");
    Eigen::JacobiSVD<CMatrix> solver(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("svd: no convergence for " + dims(a) + " input");
    }
    SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
    if (!out.u.allFinite() || !out.v.allFinite()) {
        throw NumericalError("svd: non-finite factors for " + dims(a) + " input");
    }
    return out;
}

CMatrix null_space_basis(const CMatrix& a) {
    require_valid(a, "null_space_basis");
    if (a.cols() <= a.rows()) {
        throw DimensionError("null_space_basis: need cols > rows, got " + dims(a));
    }
    const SvdResult d = svd(a);
    const Index keep = a.cols() - a.rows();
    return d.v.rightCols(keep);
}

CMatrix random_semi_unitary(Index m, Index n, std::uint64_t seed) {
    if (n < 1 || m < n) {
        throw DimensionError("random_semi_unitary: need m >= n >= 1, got m=" + std::to_string(m) +
                             " n=" + std::to_string(n));
    }
    Rng rng{seed};
    CMatrix z(m, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) z(i, j) = complex_normal(rng);

    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ() * CMatrix::Identity(m, n);
    // Fix the phase of each column by the sign of R's diagonal so the draw is Haar.
    const CMatrix& r = qr.matrixQR();
    for (Index j = 0; j < n; ++j) {
        const double mag = std::abs(r(j, j));
        if (mag > 0.0) q.col(j) *= r(j, j) / mag;
    }
    return q;
}

double orthonormality_residual(const CMatrix& a) {
    return (a.adjoint() * a - CMatrix::Identity(a.cols(), a.cols())).norm();
}

RMatrix real_embedding(const CMatrix& a) {
    const Index m = a.rows();
    const Index n = a.cols();
    RMatrix r(2 * m, 2 * n);
    r.topLeftCorner(m, n) = a.real();
    r.topRightCorner(m, n) = -a.imag();
    r.bottomLeftCorner(m, n) = a.imag();
    r.bottomRightCorner(m, n) = a.real();
    return r;
}

RVector to_real_block(const CVector& v) {
    RVector r(2 * v.size());
    r.head(v.size()) = v.real();
    r.tail(v.size()) = v.imag();
    return r;
}

CVector from_real_block(const Eigen::Ref<const RVector>& r) {
    const Index n = r.size() / 2;
    CVector v(n);
    for (Index i = 0; i < n; ++i) v(i) = cd(r(i), r(n + i));
    return v;
}

}  // namespace mulma
