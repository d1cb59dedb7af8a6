#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "swed/editor.hpp"
#include "swed/matrix.hpp"

namespace swed::oracle {

/// Rank-bounded perturbation parameterized as a * bᵀ, so iterates stay
/// feasible without projection.
struct FactoredDelta {
    Matrix a; // d_in x r
    Matrix b; // m x r
    Matrix realize() const { return matmul(a, transpose(b)); }
};

struct DescentConfig {
    double step_size = 1e-2;
    std::size_t max_iters = 5000;
    double grad_tol = 1e-8;
    std::size_t restarts = 5;
    std::uint64_t seed = 0;
    // Give up once accepted steps stop paying for themselves; the oracle is
    // allowed to lose, it must never win.
    double stall_tol = 1e-11;
    std::size_t stall_patience = 30;
};

struct DescentResult {
    Matrix delta;
    double objective = 0.0;
    bool converged = false;
    std::size_t best_restart = 0;
};

/// Multi-restart backtracking gradient descent on the factored objective.
/// Deterministic given the seed; restarts are tie-broken by index.
DescentResult descend(const EditProblem& p, const DescentConfig& cfg = {});

struct Candidate {
    Matrix delta;
    double objective = 0.0;
};

/// Random rank-limited probes a * bᵀ with standard-normal factors, rescaled
/// to the Frobenius norm of the unconstrained ridge solution.
std::vector<Candidate> random_candidates(const EditProblem& p, std::size_t count,
                                         std::uint64_t seed);

/// Gaussian elimination with partial pivoting; shares no code with the
/// Cholesky/SVD pipeline it cross-checks.
Matrix dense_solve(Matrix a, Matrix b);

/// Unconstrained ridge solution computed through dense_solve.
Matrix ridge_solution(const EditProblem& p);

} // namespace swed::oracle
