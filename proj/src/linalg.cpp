#include "vdsh/linalg.hpp"

#include <cmath>
#include <string>

#include "vdsh/errors.hpp"

namespace vdsh {

namespace {

void check_symmetric(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("solve_spd: A is not square (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ")");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double x = a(i, j), y = a(j, i);
            const double tol = 1e-10 * std::max({1.0, std::abs(x), std::abs(y)});
            if (!(std::abs(x - y) <= tol)) {
                throw NumericError("solve_spd: A is not symmetric at (" + std::to_string(i) +
                                   "," + std::to_string(j) + ")");
            }
        }
    }
}

}  // namespace

CholeskyFactor::CholeskyFactor(const Matrix& a) {
    check_symmetric(a);
    const std::size_t n = a.rows();
    l_ = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw NumericError("solve_spd: matrix is not positive definite (pivot " +
                               std::to_string(j) + " = " + std::to_string(d) +
                               "); callers should add a positive ridge");
        }
        const double ljj = std::sqrt(d);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
            l_(i, j) = s / ljj;
        }
    }
}

void CholeskyFactor::solve_in_place(std::span<double> b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) throw DimensionError("CholeskyFactor::solve: rhs length mismatch");
    // forward substitution L y = b
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        const double* li = l_.row(i).data();
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
        b[i] = s / li[i];
    }
    // backward substitution L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * b[k];
        b[ii] = s / l_(ii, ii);
    }
}

Matrix CholeskyFactor::solve(const Matrix& b) const {
    if (b.rows() != dim()) {
        throw DimensionError("solve_spd: A is " + std::to_string(dim()) + "x" +
                             std::to_string(dim()) + " but B has " + std::to_string(b.rows()) +
                             " rows");
    }
    Matrix x = b;
    std::vector<double> col(dim());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t r = 0; r < dim(); ++r) col[r] = x(r, c);
        solve_in_place(col);
        for (std::size_t r = 0; r < dim(); ++r) x(r, c) = col[r];
    }
    return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    CholeskyFactor f(a);
    return f.solve(b);
}

}  // namespace vdsh
