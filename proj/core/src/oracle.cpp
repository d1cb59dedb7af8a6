#include "swed/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "swed/errors.hpp"
#include "swed/rng.hpp"

namespace swed::oracle {

namespace {

double frob2(const Matrix& m) {
    const double f = frobenius_norm(m);
    return f * f;
}

std::size_t feasible_rank(const EditProblem& p) {
    return std::min(p.rank, std::min(p.d_in(), p.m()));
}

// The objective is a fixed quadratic in delta; precomputing the metric, the
// linear term, and the constant keeps each descent iteration at
// O(d_in^2 * m) instead of re-deriving the grams from the corpora.
struct QuadraticForm {
    Matrix metric;     // Q
    Matrix linear;     // harmfulᵀ gap
    double constant;   // ||gap||^2

    explicit QuadraticForm(const EditProblem& p)
        : metric(build_metric(p)), linear(matmul(transpose(p.harmful), safety_gap(p))) {
        constant = frob2(safety_gap(p));
    }

    double value(const Matrix& delta) const {
        const Matrix qd = matmul(metric, delta);
        double quad = 0.0, cross = 0.0;
        for (std::size_t i = 0; i < delta.size(); ++i) {
            quad += qd.data()[i] * delta.data()[i];
            cross += linear.data()[i] * delta.data()[i];
        }
        return quad - 2.0 * cross + constant;
    }

    Matrix gradient(const Matrix& delta) const {
        return scale(subtract(matmul(metric, delta), linear), 2.0);
    }
};

// One descent run from a random factored start. Returns {delta, objective,
// converged}.
DescentResult run_single(const EditProblem& p, const QuadraticForm& form,
                         const DescentConfig& cfg, std::uint64_t seed, double init_scale) {
    const std::size_t r = feasible_rank(p);
    if (r == 0) {
        Matrix zero(p.d_in(), p.m());
        const double obj = objective(p, zero);
        return DescentResult{std::move(zero), obj, true, 0};
    }
    Rng rng(seed);
    FactoredDelta f;
    f.a = rng.gaussian_matrix(p.d_in(), r, init_scale);
    f.b = rng.gaussian_matrix(p.m(), r, init_scale);

    Matrix delta = f.realize();
    double obj = form.value(delta);
    double step = cfg.step_size;
    bool converged = false;
    std::size_t stalled = 0;

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        const Matrix g = form.gradient(delta);
        const Matrix ga = matmul(g, f.b);            // d_in x r
        const Matrix gb = matmul(transpose(g), f.a); // m x r
        const double gnorm2 = frob2(ga) + frob2(gb);
        if (std::sqrt(gnorm2) <= cfg.grad_tol * (1.0 + std::fabs(obj))) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (step > 1e-18) {
            FactoredDelta trial;
            trial.a = subtract(f.a, scale(ga, step));
            trial.b = subtract(f.b, scale(gb, step));
            Matrix trial_delta = trial.realize();
            const double trial_obj = form.value(trial_delta);
            if (trial_obj <= obj - 1e-4 * step * gnorm2) {
                const double gain = obj - trial_obj;
                f = std::move(trial);
                delta = std::move(trial_delta);
                if (gain <= cfg.stall_tol * (1.0 + std::fabs(trial_obj)))
                    ++stalled;
                else
                    stalled = 0;
                obj = trial_obj;
                step *= 1.25;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || stalled >= cfg.stall_patience) break;
    }
    // Report the canonical objective, not the cached quadratic identity.
    obj = objective(p, delta);
    return DescentResult{std::move(delta), obj, converged, 0};
}

} // namespace

DescentResult descend(const EditProblem& p, const DescentConfig& cfg) {
    if (cfg.restarts == 0 || cfg.max_iters == 0 || !(cfg.step_size > 0.0))
        throw InvalidArgument("descend: config values must be positive");

    // Scale the starting factors so the first iterate lands near the
    // magnitude of the unconstrained optimum.
    const Matrix ridge = ridge_solution(p);
    const double ridge_norm = frobenius_norm(ridge);
    const std::size_t r = std::max<std::size_t>(1, feasible_rank(p));
    const double dim_scale = std::sqrt(static_cast<double>(p.d_in() * p.m()) *
                                       static_cast<double>(r));
    const double init_scale =
        ridge_norm > 0.0 ? std::sqrt(ridge_norm / std::max(dim_scale, 1.0)) : 1e-3;

    const QuadraticForm form(p);
    DescentResult best;
    bool have_best = false;
    for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
        DescentResult run =
            run_single(p, form, cfg, Rng::derive(cfg.seed, restart), init_scale);
        if (!have_best || run.objective < best.objective) {
            best = std::move(run);
            best.best_restart = restart;
            have_best = true;
        }
    }
    return best;
}

std::vector<Candidate> random_candidates(const EditProblem& p, std::size_t count,
                                         std::uint64_t seed) {
    const std::size_t r = feasible_rank(p);
    const double target_norm = frobenius_norm(ridge_solution(p));
    Rng rng(seed);
    std::vector<Candidate> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        Matrix delta(p.d_in(), p.m());
        if (r > 0) {
            const Matrix a = rng.gaussian_matrix(p.d_in(), r);
            const Matrix b = rng.gaussian_matrix(p.m(), r);
            delta = matmul(a, transpose(b));
            const double norm = frobenius_norm(delta);
            delta = scale(delta, norm > 0.0 ? target_norm / norm : 0.0);
        }
        const double obj = objective(p, delta);
        out.push_back(Candidate{std::move(delta), obj});
    }
    return out;
}

Matrix dense_solve(Matrix a, Matrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DimensionMismatch("dense_solve: matrix must be square");
    if (b.rows() != n) throw DimensionMismatch("dense_solve: rhs rows do not match");
    const std::size_t k = b.cols();

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double pivot_abs = std::fabs(a(col, col));
        for (std::size_t i = col + 1; i < n; ++i) {
            const double v = std::fabs(a(i, col));
            if (v > pivot_abs) {
                pivot_abs = v;
                pivot = i;
            }
        }
        if (pivot_abs == 0.0) throw InvalidArgument("dense_solve: singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t j = 0; j < k; ++j) std::swap(b(col, j), b(pivot, j));
        }
        const double d = a(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a(i, col) / d;
            if (f == 0.0) continue;
            a(i, col) = 0.0;
            for (std::size_t j = col + 1; j < n; ++j) a(i, j) -= f * a(col, j);
            for (std::size_t j = 0; j < k; ++j) b(i, j) -= f * b(col, j);
        }
    }
    // Back substitution.
    Matrix x(n, k);
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = b(ii, j);
            for (std::size_t p = ii + 1; p < n; ++p) s -= a(ii, p) * x(p, j);
            x(ii, j) = s / a(ii, ii);
        }
    }
    return x;
}

Matrix ridge_solution(const EditProblem& p) {
    return dense_solve(build_metric(p), matmul(transpose(p.harmful), safety_gap(p)));
}

} // namespace swed::oracle
