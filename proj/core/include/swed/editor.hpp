#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "swed/matrix.hpp"
#include "swed/neurons.hpp"

namespace swed {

/// Inputs of the rank-constrained alignment problem
///
///   min ||harmful * delta - gap||_F^2 + gamma ||harmless * delta||_F^2
///       + lambda ||delta||_F^2   s.t. rank(delta) <= rank
///
/// where gap = target - harmful * weights. `harmless` may have zero rows,
/// which drops the gamma term. lambda must be strictly positive so the
/// metric stays positive definite.
struct EditProblem {
    Matrix harmful;  // N_h x d_in input features that must be re-aligned
    Matrix harmless; // N_s x d_in anchor features to leave undisturbed
    Matrix weights;  // d_in x m columns being edited
    Matrix target;   // N_h x m desired pre-activations, row-paired with harmful
    double gamma = 1.0;
    double lambda = 1e-3;
    std::size_t rank = 32;

    EditProblem(Matrix harmful, Matrix harmless, Matrix weights, Matrix target, double gamma,
                double lambda, std::size_t rank);

    std::size_t d_in() const { return weights.rows(); }
    std::size_t m() const { return weights.cols(); }
};

struct EditSolution {
    Matrix delta_w;
    double objective = 0.0;
    double residual_align = 0.0;   // ||harmful * delta - gap||_F
    double residual_utility = 0.0; // ||harmless * delta||_F
    double delta_norm = 0.0;       // ||delta||_F
    std::size_t effective_rank = 0;
    std::vector<double> singular_values; // kept spectrum of the whitened target
};

/// Numerical knobs of the closed-form path.
struct SolverConfig {
    double rank_tolerance = 1e-9; // singular values below this (relative to
                                  // the largest) do not count toward rank
};

/// gap = target - harmful * weights.
Matrix safety_gap(const EditProblem& p);

/// Q = harmfulᵀ harmful + gamma * harmlessᵀ harmless + lambda * I.
Matrix build_metric(const EditProblem& p);

/// Closed-form solve: Cholesky-whiten the metric, rank-truncate the ridge
/// solution in the whitened space, map back, and attach diagnostics.
EditSolution solve(const EditProblem& p, const SolverConfig& cfg = {});

double objective(const EditProblem& p, const Matrix& delta);

/// 2 (Q delta - harmfulᵀ gap).
Matrix objective_gradient(const EditProblem& p, const Matrix& delta);

/// Scatter-add: column k of delta lands on column indices[k] of w; all other
/// columns are returned bit-identical.
Matrix apply_edit(const Matrix& w, const NeuronSet& indices, const Matrix& delta);

/// Gather the indexed columns of w in index order.
Matrix extract_submatrix(const Matrix& w, const NeuronSet& indices);

std::string edit_report_json(const EditSolution& sol, const EditProblem& p);

} // namespace swed
