#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace mulma {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultTolerance = 1e-10;

/// Full singular value decomposition a = u * diag(s) * v^H.
/// u is rows x rows, v is cols x cols, singular values are sorted descending.
struct SvdResult {
    CMatrix u;
    RVector singular_values;
    CMatrix v;

    /// u * diag(s) * v^H, padded to the input shape.
    CMatrix reconstruct() const;
};

bool all_finite(const CMatrix& a);

/// Throws DimensionError when the matrix is empty or NumericalError when it holds NaN/Inf.
void require_valid(const CMatrix& a, const char* what);

/// Full SVD. Throws NumericalError (with the input dimensions) when the
/// decomposition does not converge or the input is not finite.
SvdResult svd(const CMatrix& a);

/// Orthonormal basis of the trailing cols-rows right-singular vectors of a.
///
/// The column count follows the row count, not the numerical rank: a
/// rank-deficient input still yields exactly cols-rows columns, so extra null
/// directions are not merged in. Requires cols > rows (DimensionError otherwise).
CMatrix null_space_basis(const CMatrix& a);

/// m x n matrix with orthonormal columns drawn by orthonormalising a standard
/// complex Gaussian matrix. Pure function of (m, n, seed).
CMatrix random_semi_unitary(Index m, Index n, std::uint64_t seed);

/// ||a^H a - I||_F.
double orthonormality_residual(const CMatrix& a);

/// Column-block complex -> real embedding [Re(a) -Im(a); Im(a) Re(a)], so that
/// real_embedding(a) * [Re v; Im v] = [Re(a v); Im(a v)].
RMatrix real_embedding(const CMatrix& a);

/// [Re v; Im v] (all real parts first, then all imaginary parts).
RVector to_real_block(const CVector& v);
CVector from_real_block(const Eigen::Ref<const RVector>& r);

}  // namespace mulma
