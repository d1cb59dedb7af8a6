#include <doctest.h>

#include <cmath>
#include <vector>

#include "swed/editor.hpp"
#include "swed/errors.hpp"
#include "swed/linalg.hpp"
#include "swed/oracle.hpp"
#include "swed/rng.hpp"
#include "test_support.hpp"

using namespace swed;
using swed_test::max_abs_diff;

namespace {

EditProblem random_problem(Rng& rng, std::size_t n_h, std::size_t n_s, std::size_t d,
                           std::size_t m, double gamma, double lambda, std::size_t rank) {
    return EditProblem(rng.gaussian_matrix(n_h, d), rng.gaussian_matrix(n_s, d),
                       rng.gaussian_matrix(d, m, 1.0 / std::sqrt(double(d))),
                       rng.gaussian_matrix(n_h, m), gamma, lambda, rank);
}

NeuronSet set_of(std::vector<std::size_t> indices) {
    NeuronSet s;
    s.indices = std::move(indices);
    return s;
}

} // namespace

TEST_CASE("safety gap is the target minus the current projection") {
    Rng rng(1);
    const Matrix x = rng.gaussian_matrix(5, 4);
    const Matrix w = rng.gaussian_matrix(4, 3);

    // Target equal to the projection: zero gap.
    const EditProblem exact(x, Matrix(0, 0), w, matmul(x, w), 1.0, 1e-3, 2);
    CHECK(frobenius_norm(safety_gap(exact)) == 0.0);

    // Zero input features: gap equals the target.
    const Matrix y = rng.gaussian_matrix(5, 3);
    const EditProblem zero_x(Matrix(5, 4), Matrix(0, 0), w, y, 1.0, 1e-3, 2);
    CHECK(safety_gap(zero_x) == y);

    // Random instance against direct arithmetic.
    const EditProblem general(x, Matrix(0, 0), w, y, 1.0, 1e-3, 2);
    CHECK(max_abs_diff(safety_gap(general), subtract(y, matmul(x, w))) == 0.0);
}

TEST_CASE("metric reduces to scaled identities on trivial data") {
    const EditProblem zeros(Matrix(3, 2), Matrix(3, 2), Matrix(2, 1), Matrix(3, 1), 1.0, 2.0, 1);
    CHECK(max_abs_diff(build_metric(zeros), scale(Matrix::identity(2), 2.0)) == 0.0);

    const EditProblem eye(Matrix::identity(2), Matrix(0, 0), Matrix(2, 1), Matrix(2, 1), 0.0,
                          1.0, 1);
    CHECK(max_abs_diff(build_metric(eye), scale(Matrix::identity(2), 2.0)) == 0.0);
}

TEST_CASE("metric is symmetric positive definite on random data") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const EditProblem p = random_problem(rng, 6, 5, 4, 3, 0.7, 1e-3, 2);
        const Matrix q = build_metric(p);
        CHECK(q == transpose(q));
        CHECK_NOTHROW((void)cholesky(q));
    }
}

TEST_CASE("zero gap solves to a zero edit") {
    Rng rng(3);
    const Matrix x = rng.gaussian_matrix(6, 4);
    const Matrix w = rng.gaussian_matrix(4, 3);
    const EditProblem p(x, rng.gaussian_matrix(5, 4), w, matmul(x, w), 1.0, 1e-3, 3);
    const EditSolution sol = solve(p);
    CHECK(frobenius_norm(sol.delta_w) <= 1e-12);
    CHECK(sol.objective <= 1e-12);
    CHECK(sol.effective_rank == 0);
}

TEST_CASE("scalar instance reproduces the hand computation") {
    // One feature, one neuron, no harmless anchors: metric 2, ridge 0.5,
    // whitened value 1/sqrt(2), final edit 0.5, objective 0.5.
    const EditProblem p(Matrix::from_rows({{1.0}}), Matrix(0, 1), Matrix::from_rows({{0.0}}),
                        Matrix::from_rows({{1.0}}), 1.0, 1.0, 1);
    CHECK(max_abs_diff(build_metric(p), Matrix::from_rows({{2.0}})) == 0.0);
    const EditSolution sol = solve(p);
    CHECK(sol.delta_w(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.objective == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(sol.singular_values.size() == 1);
    CHECK(sol.singular_values[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(sol.effective_rank == 1);
}

TEST_CASE("full-rank solve matches the independent dense ridge oracle") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 3 + static_cast<std::size_t>(rng.next_u64() % 6);
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 4);
        EditProblem p = random_problem(rng, 8, 6, d, m, 0.5, 1e-2, std::min(d, m));
        const EditSolution sol = solve(p);
        const Matrix ridge = oracle::ridge_solution(p);
        CHECK(frobenius_norm(subtract(sol.delta_w, ridge)) <=
              1e-8 * (1.0 + frobenius_norm(ridge)));
    }
}

TEST_CASE("objective evaluates the three penalty terms") {
    Rng rng(5);
    const EditProblem p = random_problem(rng, 6, 5, 4, 3, 0.8, 1e-2, 2);
    const Matrix gap = safety_gap(p);

    const double at_zero = objective(p, Matrix(4, 3));
    CHECK(at_zero ==
          doctest::Approx(frobenius_norm(gap) * frobenius_norm(gap)).epsilon(1e-12));

    const Matrix delta = rng.gaussian_matrix(4, 3);
    const double a = frobenius_norm(subtract(matmul(p.harmful, delta), gap));
    const double u = frobenius_norm(matmul(p.harmless, delta));
    const double n = frobenius_norm(delta);
    CHECK(objective(p, delta) ==
          doctest::Approx(a * a + p.gamma * u * u + p.lambda * n * n).epsilon(1e-12));
}

TEST_CASE("exact fit with no regularization reaches zero objective") {
    Rng rng(6);
    // Square invertible features and gamma = 0; lambda must stay positive by
    // contract, so use a negligible ridge and check the exact solution.
    const Matrix x = add(rng.gaussian_matrix(4, 4), scale(Matrix::identity(4), 4.0));
    const Matrix w = rng.gaussian_matrix(4, 2);
    const Matrix y = rng.gaussian_matrix(4, 2);
    const EditProblem p(x, Matrix(0, 4), w, y, 0.0, 1e-12, 4);
    const Matrix exact = oracle::dense_solve(x, safety_gap(p));
    CHECK(objective(p, exact) <= 1e-10);
}

TEST_CASE("gradient is zero at the unconstrained optimum and -2 XᵀD at zero") {
    Rng rng(7);
    const EditProblem p = random_problem(rng, 8, 5, 4, 3, 0.5, 1e-2, 3);
    const Matrix ridge = oracle::ridge_solution(p);
    const Matrix g_at_ridge = objective_gradient(p, ridge);
    CHECK(frobenius_norm(g_at_ridge) <= 1e-8 * (1.0 + frobenius_norm(ridge)));

    const Matrix g_at_zero = objective_gradient(p, Matrix(4, 3));
    const Matrix expected = scale(matmul(transpose(p.harmful), safety_gap(p)), -2.0);
    CHECK(max_abs_diff(g_at_zero, expected) <= 1e-12);
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(8);
    const double h = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        const EditProblem p = random_problem(rng, 6, 4, 4, 3, 0.9, 1e-2, 2);
        Matrix delta = rng.gaussian_matrix(4, 3);
        const Matrix g = objective_gradient(p, delta);
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            for (std::size_t j = 0; j < delta.cols(); ++j) {
                Matrix up = delta;
                Matrix down = delta;
                up(i, j) += h;
                down(i, j) -= h;
                const double fd = (objective(p, up) - objective(p, down)) / (2.0 * h);
                CHECK(std::fabs(g(i, j) - fd) <= 1e-5);
            }
        }
    }
}

TEST_CASE("apply_edit touches exactly the indexed columns") {
    Rng rng(9);
    const Matrix w = rng.gaussian_matrix(4, 3);

    CHECK(apply_edit(w, set_of({0, 1, 2}), Matrix(4, 3)) == w);

    const Matrix full_delta = rng.gaussian_matrix(4, 3);
    CHECK(max_abs_diff(apply_edit(w, set_of({0, 1, 2}), full_delta), add(w, full_delta)) == 0.0);

    const Matrix delta = rng.gaussian_matrix(4, 1);
    const Matrix edited = apply_edit(w, set_of({1}), delta);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(edited(i, 0) == w(i, 0));
        CHECK(edited(i, 2) == w(i, 2));
        CHECK(edited(i, 1) == w(i, 1) + delta(i, 0));
    }

    CHECK_THROWS_AS((void)apply_edit(w, set_of({3}), delta), IndexOutOfRange);
    CHECK_THROWS_AS((void)apply_edit(w, set_of({0, 1}), delta), DimensionMismatch);
}

TEST_CASE("extract_submatrix gathers columns in index order") {
    const Matrix eye = Matrix::identity(3);
    const Matrix first = extract_submatrix(eye, set_of({0}));
    CHECK(first(0, 0) == 1.0);
    CHECK(first(1, 0) == 0.0);

    Rng rng(10);
    const Matrix w = rng.gaussian_matrix(5, 4);
    CHECK(extract_submatrix(w, set_of({0, 1, 2, 3})) == w);

    const NeuronSet s = set_of({1, 3});
    const Matrix sub = extract_submatrix(w, s);
    const Matrix zero = subtract(sub, sub);
    CHECK(apply_edit(w, s, zero) == w);

    // Gather-then-scatter round trip: re-adding the extracted columns
    // doubles exactly those columns.
    const Matrix doubled = apply_edit(w, s, sub);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(doubled(i, 1) == 2.0 * w(i, 1));
        CHECK(doubled(i, 3) == 2.0 * w(i, 3));
        CHECK(doubled(i, 0) == w(i, 0));
    }

    CHECK_THROWS_AS((void)extract_submatrix(w, set_of({4})), IndexOutOfRange);
}

TEST_CASE("solutions respect the rank bound") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 4 + static_cast<std::size_t>(rng.next_u64() % 8);
        const std::size_t m = 3 + static_cast<std::size_t>(rng.next_u64() % 6);
        const std::size_t r = 1 + static_cast<std::size_t>(rng.next_u64() % std::min(d, m));
        const EditProblem p = random_problem(rng, 10, 8, d, m, 1.0, 1e-3, r);
        const EditSolution sol = solve(p);
        CHECK(sol.effective_rank <= r);
        CHECK(numeric_rank(svd(sol.delta_w)) <= r);
    }
}

TEST_CASE("invertible whitening preserves rank") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 5 + static_cast<std::size_t>(rng.next_u64() % 6);
        const std::size_t m = 4 + static_cast<std::size_t>(rng.next_u64() % 4);
        const std::size_t k = 1 + static_cast<std::size_t>(rng.next_u64() % std::min(d, m));
        const Matrix low_rank =
            matmul(rng.gaussian_matrix(d, k), transpose(rng.gaussian_matrix(m, k)));
        const CholeskyFactor chol =
            cholesky(add(gram(rng.gaussian_matrix(d + 2, d)), Matrix::identity(d)));
        CHECK(numeric_rank(svd(matmul(chol.r, low_rank))) == numeric_rank(svd(low_rank)));
    }
}

TEST_CASE("objective decomposition identity holds on every solve") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const EditProblem p = random_problem(rng, 8, 6, 5, 4, 2.0, 1e-2, 2);
        const EditSolution sol = solve(p);
        const double recomposed = sol.residual_align * sol.residual_align +
                                  p.gamma * sol.residual_utility * sol.residual_utility +
                                  p.lambda * sol.delta_norm * sol.delta_norm;
        CHECK(sol.objective == doctest::Approx(recomposed).epsilon(1e-9));
        CHECK(sol.objective == doctest::Approx(objective(p, sol.delta_w)).epsilon(1e-9));
    }
}

TEST_CASE("gamma, lambda, and rank sweeps are monotone") {
    Rng rng(14);
    const Matrix x_low = rng.gaussian_matrix(10, 6);
    const Matrix x_safe = rng.gaussian_matrix(8, 6);
    const Matrix w = rng.gaussian_matrix(6, 4);
    const Matrix y = rng.gaussian_matrix(10, 4);

    double prev_utility = -1.0;
    for (double gamma : {0.0, 0.5, 1.0, 5.0, 50.0}) {
        const EditSolution sol = solve(EditProblem(x_low, x_safe, w, y, gamma, 1e-3, 3));
        if (prev_utility >= 0.0) CHECK(sol.residual_utility <= prev_utility + 1e-9);
        prev_utility = sol.residual_utility;
    }

    double prev_norm = -1.0;
    for (double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const EditSolution sol = solve(EditProblem(x_low, x_safe, w, y, 1.0, lambda, 3));
        if (prev_norm >= 0.0) CHECK(sol.delta_norm <= prev_norm + 1e-9);
        prev_norm = sol.delta_norm;
    }

    double prev_obj = -1.0;
    for (std::size_t r : {1u, 2u, 3u, 4u}) {
        const EditSolution sol = solve(EditProblem(x_low, x_safe, w, y, 1.0, 1e-3, r));
        if (prev_obj >= 0.0) CHECK(sol.objective <= prev_obj + 1e-9);
        prev_obj = sol.objective;
    }
}

TEST_CASE("problem construction enforces the contracts") {
    Rng rng(15);
    const Matrix x = rng.gaussian_matrix(5, 4);
    const Matrix w = rng.gaussian_matrix(4, 3);
    const Matrix y = rng.gaussian_matrix(5, 3);

    CHECK_THROWS_AS(EditProblem(x, Matrix(0, 0), w, y, 1.0, 0.0, 2), InvalidArgument);
    CHECK_THROWS_AS(EditProblem(x, Matrix(0, 0), w, y, -1.0, 1e-3, 2), InvalidArgument);
    CHECK_THROWS_AS(EditProblem(x, Matrix(3, 5), w, y, 1.0, 1e-3, 2), DimensionMismatch);
    CHECK_THROWS_AS(EditProblem(x, Matrix(0, 0), w, rng.gaussian_matrix(4, 3), 1.0, 1e-3, 2),
                    DimensionMismatch);
    CHECK_THROWS_AS(EditProblem(x, Matrix(0, 0), w, rng.gaussian_matrix(5, 2), 1.0, 1e-3, 2),
                    DimensionMismatch);
}

TEST_CASE("edit report JSON carries the diagnostics") {
    Rng rng(16);
    const EditProblem p = random_problem(rng, 6, 4, 4, 3, 1.0, 1e-3, 2);
    const EditSolution sol = solve(p);
    const std::string text = edit_report_json(sol, p);
    CHECK(text.find("\"objective\"") != std::string::npos);
    CHECK(text.find("\"residual_align\"") != std::string::npos);
    CHECK(text.find("\"singular_values\"") != std::string::npos);
    CHECK(text.find("\"rank\": 2") != std::string::npos);
}
