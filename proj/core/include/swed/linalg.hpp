#pragma once

#include <cstddef>
#include <vector>

#include "swed/matrix.hpp"

namespace swed {

/// Upper-triangular Cholesky factor R with RᵀR equal to the factored matrix.
struct CholeskyFactor {
    Matrix r;
    std::size_t dim() const { return r.rows(); }
};

enum class TriangularSide {
    lower_transpose, ///< solve RᵀX = B (forward substitution)
    upper,           ///< solve RX = B (back substitution)
};

/// Thin SVD A = U diag(singular_values) Vᵀ with orthonormal U, V columns,
/// singular values sorted non-increasing, and a deterministic sign
/// convention: the largest-magnitude entry of each U column is positive,
/// ties resolved toward the lowest row index.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix v;
};

/// Factor a symmetric matrix; asymmetry up to 1e-9 (relative to the largest
/// entry) is averaged away, anything larger is rejected. Throws
/// NotPositiveDefinite when a pivot falls at or below
/// dim * machine_epsilon * max_diagonal.
CholeskyFactor cholesky(const Matrix& a);

Matrix solve_triangular(const CholeskyFactor& r, const Matrix& b, TriangularSide side);

/// One-sided Jacobi SVD with Householder-QR preconditioning. Throws
/// ConvergenceFailure after 100 * max(rows, cols) sweeps.
SvdResult svd(const Matrix& a);

/// U Σ_r Vᵀ keeping the top-r singular values; r past the spectrum returns
/// the full reconstruction, r = 0 the zero matrix.
Matrix truncate_rank(const SvdResult& s, std::size_t r);

/// Number of singular values above rel_tol times the largest one.
std::size_t numeric_rank(const SvdResult& s, double rel_tol = 1e-9);

} // namespace swed
