#include "swed/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "swed/errors.hpp"

namespace swed {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Householder QR of a tall matrix (rows >= cols). Returns the thin Q
// (rows x cols, orthonormal columns) and square upper-triangular R.
void householder_qr(const Matrix& a, Matrix& q, Matrix& r) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix w = a; // transformed in place; reflectors kept separately
    std::vector<std::vector<double>> reflectors(n);
    std::vector<double> betas(n, 0.0);
    std::vector<double> scratch(n, 0.0);

    for (std::size_t k = 0; k < n; ++k) {
        double norm2 = 0.0;
        for (std::size_t i = k; i < m; ++i) norm2 += w(i, k) * w(i, k);
        const double norm = std::sqrt(norm2);
        auto& v = reflectors[k];
        v.assign(m - k, 0.0);
        if (norm == 0.0) continue; // column already zero, H = I
        const double alpha = w(k, k) >= 0.0 ? -norm : norm;
        v[0] = w(k, k) - alpha;
        for (std::size_t i = k + 1; i < m; ++i) v[i - k] = w(i, k);
        double vnorm2 = 0.0;
        for (double t : v) vnorm2 += t * t;
        if (vnorm2 == 0.0) continue;
        betas[k] = 2.0 / vnorm2;

        // Apply I - beta v vᵀ to the trailing block, row sweeps only.
        std::fill(scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end(), 0.0);
        for (std::size_t i = k; i < m; ++i) {
            const double vi = v[i - k];
            if (vi == 0.0) continue;
            const double* row = w.row_ptr(i);
            for (std::size_t j = k; j < n; ++j) scratch[j] += vi * row[j];
        }
        for (std::size_t i = k; i < m; ++i) {
            const double f = betas[k] * v[i - k];
            if (f == 0.0) continue;
            double* row = w.row_ptr(i);
            for (std::size_t j = k; j < n; ++j) row[j] -= f * scratch[j];
        }
    }

    r = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) r(i, j) = w(i, j);

    // Accumulate the thin Q by applying reflectors to I in reverse order.
    q = Matrix(m, n);
    for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
    for (std::size_t kk = n; kk-- > 0;) {
        const auto& v = reflectors[kk];
        const double beta = betas[kk];
        if (beta == 0.0) continue;
        std::fill(scratch.begin(), scratch.end(), 0.0);
        for (std::size_t i = kk; i < m; ++i) {
            const double vi = v[i - kk];
            if (vi == 0.0) continue;
            const double* row = q.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) scratch[j] += vi * row[j];
        }
        for (std::size_t i = kk; i < m; ++i) {
            const double f = beta * v[i - kk];
            if (f == 0.0) continue;
            double* row = q.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) row[j] -= f * scratch[j];
        }
    }
}

// One-sided Jacobi on the columns of a square matrix G (n x n), held
// transposed so each logical column is a contiguous row. Rotations are
// accumulated into vt the same way. Returns false if the sweep cap is hit.
bool jacobi_orthogonalize(Matrix& gt, Matrix& vt, std::size_t sweep_cap) {
    const std::size_t n = gt.rows();
    if (n < 2) return true;
    const double tol = std::sqrt(static_cast<double>(n)) * kEps;
    for (std::size_t sweep = 0; sweep < sweep_cap; ++sweep) {
        std::size_t rotations = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* cp = gt.row_ptr(p);
                double* cq = gt.row_ptr(q);
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    app += cp[i] * cp[i];
                    aqq += cq[i] * cq[i];
                    apq += cp[i] * cq[i];
                }
                if (app == 0.0 || aqq == 0.0) continue;
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double gp = cp[i];
                    const double gq = cq[i];
                    cp[i] = c * gp - s * gq;
                    cq[i] = s * gp + c * gq;
                }
                double* vp = vt.row_ptr(p);
                double* vq = vt.row_ptr(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double wp = vp[i];
                    const double wq = vq[i];
                    vp[i] = c * wp - s * wq;
                    vq[i] = s * wp + c * wq;
                }
                ++rotations;
            }
        }
        if (rotations == 0) return true;
    }
    return false;
}

// Replace near-null columns of u0t (transposed storage) with an orthonormal
// completion so UᵀU = I holds even for rank-deficient input. Candidates come
// from the standard basis; the one with the largest residual after
// projection wins, which always exists while fewer than n columns are fixed.
void complete_basis(Matrix& u0t, std::size_t first_bad) {
    const std::size_t n = u0t.rows();
    std::vector<double> candidate(n, 0.0);
    std::vector<double> best(n, 0.0);
    for (std::size_t k = first_bad; k < n; ++k) {
        double best_norm = -1.0;
        for (std::size_t e = 0; e < n; ++e) {
            std::fill(candidate.begin(), candidate.end(), 0.0);
            candidate[e] = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double* cj = u0t.row_ptr(j);
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += candidate[i] * cj[i];
                for (std::size_t i = 0; i < n; ++i) candidate[i] -= dot * cj[i];
            }
            double norm = 0.0;
            for (double t : candidate) norm += t * t;
            norm = std::sqrt(norm);
            if (norm > best_norm) {
                best_norm = norm;
                best = candidate;
            }
            if (best_norm > 0.9) break;
        }
        // Second orthogonalization pass tightens near-machine orthogonality.
        double* ck = u0t.row_ptr(k);
        std::copy(best.begin(), best.end(), ck);
        for (std::size_t j = 0; j < k; ++j) {
            const double* cj = u0t.row_ptr(j);
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += ck[i] * cj[i];
            for (std::size_t i = 0; i < n; ++i) ck[i] -= dot * cj[i];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += ck[i] * ck[i];
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) ck[i] /= norm;
    }
}

// Thin SVD of a tall matrix (rows >= cols) via QR + one-sided Jacobi.
SvdResult svd_tall(const Matrix& a, std::size_t sweep_cap) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    Matrix q, r0;
    householder_qr(a, q, r0);

    Matrix gt = transpose(r0);                  // row i of gt = column i of r0
    Matrix vt = Matrix::identity(n);
    if (!jacobi_orthogonalize(gt, vt, sweep_cap))
        throw ConvergenceFailure("svd: sweep budget exhausted (" + std::to_string(sweep_cap) +
                                 " sweeps)");

    std::vector<double> sigma(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double norm = 0.0;
        const double* ck = gt.row_ptr(k);
        for (std::size_t i = 0; i < n; ++i) norm += ck[i] * ck[i];
        sigma[k] = std::sqrt(norm);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    Matrix u0t(n, n);
    Matrix vst(n, n);
    std::vector<double> sorted_sigma(n);
    const double sigma_max = sigma.empty() ? 0.0 : sigma[order[0]];
    const double null_tol = static_cast<double>(std::max(m, n)) * kEps * sigma_max;
    std::size_t first_bad = n;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        sorted_sigma[k] = sigma[src];
        const double* gsrc = gt.row_ptr(src);
        double* udst = u0t.row_ptr(k);
        if (sigma[src] > null_tol && sigma[src] > 0.0) {
            for (std::size_t i = 0; i < n; ++i) udst[i] = gsrc[i] / sigma[src];
        } else {
            if (first_bad == n) first_bad = k;
            for (std::size_t i = 0; i < n; ++i) udst[i] = gsrc[i]; // rebuilt below
        }
        const double* vsrc = vt.row_ptr(src);
        double* vdst = vst.row_ptr(k);
        for (std::size_t i = 0; i < n; ++i) vdst[i] = vsrc[i];
    }
    if (first_bad < n) complete_basis(u0t, first_bad);

    SvdResult out;
    out.singular_values = std::move(sorted_sigma);
    out.v = transpose(vst);
    out.u = matmul(q, transpose(u0t));
    return out;
}

void apply_sign_convention(SvdResult& s) {
    const std::size_t m = s.u.rows();
    const std::size_t k = s.u.cols();
    for (std::size_t j = 0; j < k; ++j) {
        double best = -1.0;
        std::size_t best_row = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = std::fabs(s.u(i, j));
            if (v > best) {
                best = v;
                best_row = i;
            }
        }
        if (s.u(best_row, j) < 0.0) {
            for (std::size_t i = 0; i < m; ++i) s.u(i, j) = -s.u(i, j);
            for (std::size_t i = 0; i < s.v.rows(); ++i) s.v(i, j) = -s.v(i, j);
        }
    }
}

} // namespace

CholeskyFactor cholesky(const Matrix& a) {
    if (a.rows() != a.cols())
        throw DimensionMismatch("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
    const std::size_t n = a.rows();

    double max_abs = 0.0;
    double max_skew = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            max_abs = std::max(max_abs, std::fabs(a(i, j)));
            if (j > i) max_skew = std::max(max_skew, std::fabs(a(i, j) - a(j, i)));
        }
    if (max_skew > 1e-9 * std::max(1.0, max_abs))
        throw InvalidArgument("cholesky: input asymmetry " + std::to_string(max_skew) +
                              " exceeds tolerance");

    Matrix s(n, n);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
        max_diag = std::max(max_diag, s(i, i));
    }
    const double pivot_tol = static_cast<double>(n) * kEps * std::max(max_diag, 0.0);

    // Row-oriented outer-product factorization: row i of R is finished once
    // rows above it have been subtracted.
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double* ri = r.row_ptr(i);
        for (std::size_t j = i; j < n; ++j) ri[j] = s(i, j);
        for (std::size_t k = 0; k < i; ++k) {
            const double c = r(k, i);
            if (c == 0.0) continue;
            const double* rk = r.row_ptr(k);
            for (std::size_t j = i; j < n; ++j) ri[j] -= c * rk[j];
        }
        const double pivot = ri[i];
        if (pivot <= pivot_tol)
            throw NotPositiveDefinite("cholesky: pivot " + std::to_string(pivot) + " at index " +
                                      std::to_string(i) +
                                      " (matrix not positive definite; raise lambda)");
        const double d = std::sqrt(pivot);
        ri[i] = d;
        for (std::size_t j = i + 1; j < n; ++j) ri[j] /= d;
    }
    return CholeskyFactor{std::move(r)};
}

Matrix solve_triangular(const CholeskyFactor& chol, const Matrix& b, TriangularSide side) {
    const Matrix& r = chol.r;
    const std::size_t n = chol.dim();
    if (b.rows() != n)
        throw DimensionMismatch("solve_triangular: factor dim " + std::to_string(n) +
                                " vs rhs rows " + std::to_string(b.rows()));
    const std::size_t k = b.cols();
    Matrix x = b;
    if (side == TriangularSide::lower_transpose) {
        // Rᵀ is lower triangular; forward substitution top to bottom.
        for (std::size_t i = 0; i < n; ++i) {
            double* xi = x.row_ptr(i);
            for (std::size_t p = 0; p < i; ++p) {
                const double c = r(p, i); // (Rᵀ)(i,p)
                if (c == 0.0) continue;
                const double* xp = x.row_ptr(p);
                for (std::size_t j = 0; j < k; ++j) xi[j] -= c * xp[j];
            }
            const double d = r(i, i);
            for (std::size_t j = 0; j < k; ++j) xi[j] /= d;
        }
    } else {
        // Back substitution bottom to top.
        for (std::size_t ii = n; ii-- > 0;) {
            double* xi = x.row_ptr(ii);
            const double* ri = r.row_ptr(ii);
            for (std::size_t p = ii + 1; p < n; ++p) {
                const double c = ri[p];
                if (c == 0.0) continue;
                const double* xp = x.row_ptr(p);
                for (std::size_t j = 0; j < k; ++j) xi[j] -= c * xp[j];
            }
            const double d = ri[ii];
            for (std::size_t j = 0; j < k; ++j) xi[j] /= d;
        }
    }
    return x;
}

SvdResult svd(const Matrix& a) {
    if (!a.all_finite()) throw InvalidArgument("svd: input has non-finite entries");
    const std::size_t cap = 100 * std::max<std::size_t>(1, std::max(a.rows(), a.cols()));
    if (a.rows() == 0 || a.cols() == 0) {
        SvdResult empty;
        empty.u = Matrix(a.rows(), 0);
        empty.v = Matrix(a.cols(), 0);
        return empty;
    }
    SvdResult s;
    if (a.rows() >= a.cols()) {
        s = svd_tall(a, cap);
    } else {
        s = svd_tall(transpose(a), cap);
        std::swap(s.u, s.v);
    }
    apply_sign_convention(s);
    return s;
}

Matrix truncate_rank(const SvdResult& s, std::size_t r) {
    const std::size_t m = s.u.rows();
    const std::size_t n = s.v.rows();
    const std::size_t keep = std::min(r, s.singular_values.size());
    Matrix out(m, n);
    for (std::size_t k = 0; k < keep; ++k) {
        const double sv = s.singular_values[k];
        if (sv == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
            const double f = sv * s.u(i, k);
            if (f == 0.0) continue;
            double* row = out.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) row[j] += f * s.v(j, k);
        }
    }
    return out;
}

std::size_t numeric_rank(const SvdResult& s, double rel_tol) {
    if (s.singular_values.empty()) return 0;
    const double cutoff = rel_tol * s.singular_values.front();
    std::size_t rank = 0;
    for (double sv : s.singular_values)
        if (sv > cutoff && sv > 0.0) ++rank;
    return rank;
}

} // namespace swed
