#include "swed/editor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <json.hpp>

#include "swed/errors.hpp"
#include "swed/linalg.hpp"

namespace swed {

EditProblem::EditProblem(Matrix harmful_in, Matrix harmless_in, Matrix weights_in,
                         Matrix target_in, double gamma_in, double lambda_in,
                         std::size_t rank_in)
    : harmful(std::move(harmful_in)),
      harmless(std::move(harmless_in)),
      weights(std::move(weights_in)),
      target(std::move(target_in)),
      gamma(gamma_in),
      lambda(lambda_in),
      rank(rank_in) {
    const std::size_t din = weights.rows();
    if (harmful.cols() != din)
        throw DimensionMismatch("EditProblem: harmful features have " +
                                std::to_string(harmful.cols()) + " columns, weights expect " +
                                std::to_string(din));
    if (harmless.rows() > 0 && harmless.cols() != din)
        throw DimensionMismatch("EditProblem: harmless features have " +
                                std::to_string(harmless.cols()) + " columns, weights expect " +
                                std::to_string(din));
    if (target.cols() != weights.cols())
        throw DimensionMismatch("EditProblem: target has " + std::to_string(target.cols()) +
                                " columns, weights have " + std::to_string(weights.cols()));
    if (target.rows() != harmful.rows())
        throw DimensionMismatch("EditProblem: target rows " + std::to_string(target.rows()) +
                                " do not pair with harmful rows " +
                                std::to_string(harmful.rows()));
    if (!(lambda > 0.0))
        throw InvalidArgument("EditProblem: lambda must be strictly positive");
    if (!(gamma >= 0.0)) throw InvalidArgument("EditProblem: gamma must be non-negative");
    if (!harmful.all_finite() || !harmless.all_finite() || !weights.all_finite() ||
        !target.all_finite())
        throw InvalidArgument("EditProblem: inputs contain non-finite entries");
}

Matrix safety_gap(const EditProblem& p) {
    return subtract(p.target, matmul(p.harmful, p.weights));
}

Matrix build_metric(const EditProblem& p) {
    Matrix q = gram(p.harmful);
    if (p.gamma > 0.0 && p.harmless.rows() > 0) {
        const Matrix gs = gram(p.harmless);
        for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] += p.gamma * gs.data()[i];
    }
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, i) += p.lambda;
    return q;
}

EditSolution solve(const EditProblem& p, const SolverConfig& cfg) {
    const Matrix gap = safety_gap(p);
    const Matrix metric = build_metric(p);
    const CholeskyFactor chol = cholesky(metric);

    // Ridge solution through two triangular solves, then whiten.
    const Matrix rhs = matmul(transpose(p.harmful), gap);
    const Matrix half = solve_triangular(chol, rhs, TriangularSide::lower_transpose);
    const Matrix ridge = solve_triangular(chol, half, TriangularSide::upper);
    const Matrix whitened = matmul(chol.r, ridge);

    const SvdResult spectrum = svd(whitened);
    const Matrix truncated = truncate_rank(spectrum, p.rank);
    Matrix delta = solve_triangular(chol, truncated, TriangularSide::upper);

    EditSolution sol;
    sol.residual_align = frobenius_norm(subtract(matmul(p.harmful, delta), gap));
    sol.residual_utility =
        p.harmless.rows() > 0 ? frobenius_norm(matmul(p.harmless, delta)) : 0.0;
    sol.delta_norm = frobenius_norm(delta);
    sol.objective = sol.residual_align * sol.residual_align +
                    p.gamma * sol.residual_utility * sol.residual_utility +
                    p.lambda * sol.delta_norm * sol.delta_norm;

    const std::size_t keep = std::min(p.rank, spectrum.singular_values.size());
    sol.singular_values.assign(spectrum.singular_values.begin(),
                               spectrum.singular_values.begin() +
                                   static_cast<std::ptrdiff_t>(keep));
    const double sigma_max =
        spectrum.singular_values.empty() ? 0.0 : spectrum.singular_values.front();
    // Invertible whitening preserves rank, so the kept spectrum decides it.
    for (double sv : sol.singular_values)
        if (sv > 1e-9 * sigma_max && sv > 0.0) ++sol.effective_rank;
    sol.delta_w = std::move(delta);
    return sol;
}

double objective(const EditProblem& p, const Matrix& delta) {
    if (delta.rows() != p.d_in() || delta.cols() != p.m())
        throw DimensionMismatch("objective: delta is " + std::to_string(delta.rows()) + "x" +
                                std::to_string(delta.cols()) + ", expected " +
                                std::to_string(p.d_in()) + "x" + std::to_string(p.m()));
    const Matrix gap = safety_gap(p);
    const double align = frobenius_norm(subtract(matmul(p.harmful, delta), gap));
    double value = align * align;
    if (p.gamma > 0.0 && p.harmless.rows() > 0) {
        const double utility = frobenius_norm(matmul(p.harmless, delta));
        value += p.gamma * utility * utility;
    }
    const double norm = frobenius_norm(delta);
    return value + p.lambda * norm * norm;
}

Matrix objective_gradient(const EditProblem& p, const Matrix& delta) {
    if (delta.rows() != p.d_in() || delta.cols() != p.m())
        throw DimensionMismatch("objective_gradient: delta shape mismatch");
    const Matrix metric = build_metric(p);
    const Matrix rhs = matmul(transpose(p.harmful), safety_gap(p));
    return scale(subtract(matmul(metric, delta), rhs), 2.0);
}

Matrix apply_edit(const Matrix& w, const NeuronSet& indices, const Matrix& delta) {
    if (delta.cols() != indices.size())
        throw DimensionMismatch("apply_edit: delta has " + std::to_string(delta.cols()) +
                                " columns for " + std::to_string(indices.size()) + " indices");
    if (delta.rows() != w.rows())
        throw DimensionMismatch("apply_edit: delta rows " + std::to_string(delta.rows()) +
                                " vs weight rows " + std::to_string(w.rows()));
    Matrix out = w;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t j = indices.indices[k];
        if (j >= w.cols())
            throw IndexOutOfRange("apply_edit: neuron index " + std::to_string(j) +
                                  " out of range for " + std::to_string(w.cols()) + " columns");
        for (std::size_t i = 0; i < w.rows(); ++i) out(i, j) += delta(i, k);
    }
    return out;
}

Matrix extract_submatrix(const Matrix& w, const NeuronSet& indices) {
    Matrix out(w.rows(), indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t j = indices.indices[k];
        if (j >= w.cols())
            throw IndexOutOfRange("extract_submatrix: neuron index " + std::to_string(j) +
                                  " out of range for " + std::to_string(w.cols()) + " columns");
        for (std::size_t i = 0; i < w.rows(); ++i) out(i, k) = w(i, j);
    }
    return out;
}

std::string edit_report_json(const EditSolution& sol, const EditProblem& p) {
    nlohmann::json doc;
    doc["objective"] = sol.objective;
    doc["residual_align"] = sol.residual_align;
    doc["residual_utility"] = sol.residual_utility;
    doc["delta_norm"] = sol.delta_norm;
    doc["effective_rank"] = sol.effective_rank;
    doc["singular_values"] = sol.singular_values;
    doc["gamma"] = p.gamma;
    doc["lambda"] = p.lambda;
    doc["rank"] = p.rank;
    return doc.dump(2) + "\n";
}

} // namespace swed
