#include "swed/matrix.hpp"

#include <cmath>
#include <string>

#include "swed/errors.hpp"

namespace swed {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw DimensionMismatch(std::string(op) + ": incompatible shapes " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionMismatch("from_rows: ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("subtract", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
    return c;
}

Matrix gram(const Matrix& a) {
    const std::size_t n = a.cols();
    Matrix g(n, n);
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* row = a.row_ptr(k);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = row[i];
            if (v == 0.0) continue;
            double* gi = g.row_ptr(i);
            for (std::size_t j = i; j < n; ++j) gi[j] += v * row[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g(j, i) = g(i, j);
    return g;
}

double frobenius_norm(const Matrix& a) {
    // Scaled accumulation keeps the sum from overflowing for large entries.
    double maxabs = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = std::fabs(a.data()[i]);
        if (v > maxabs) maxabs = v;
    }
    if (maxabs == 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a.data()[i] / maxabs;
        sum += v * v;
    }
    return maxabs * std::sqrt(sum);
}

} // namespace swed
