#include "vdsh/matrix.hpp"

#include <cmath>
#include <string>

#include "vdsh/errors.hpp"

namespace vdsh {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Matrix::frobenius_norm() const { return norm2(flat()); }

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.cols() || y.size() != a.rows()) {
        throw DimensionError("matvec: A is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", x has " + std::to_string(x.size()) +
                             ", y has " + std::to_string(y.size()));
    }
    const double* row = a.data();
    for (std::size_t r = 0; r < a.rows(); ++r, row += a.cols()) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void matvec_transpose(const Matrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.rows() || y.size() != a.cols()) {
        throw DimensionError("matvec_transpose: A is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", x has " + std::to_string(x.size()) +
                             ", y has " + std::to_string(y.size()));
    }
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] = 0.0;
    const double* row = a.data();
    for (std::size_t r = 0; r < a.rows(); ++r, row += a.cols()) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < a.cols(); ++c) y[c] += xr * row[c];
    }
}

Matrix gram(const Matrix& a) {
    Matrix g(a.cols(), a.cols());
    const double* row = a.data();
    for (std::size_t r = 0; r < a.rows(); ++r, row += a.cols()) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            double* gi = &g(i, 0);
            for (std::size_t j = i; j < a.cols(); ++j) gi[j] += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " times " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k).data();
            double* crow = &c(i, 0);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

std::uint64_t Rng::next_u64() {
    // splitmix64: counter-based, identical output on every platform.
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_symmetric(double scale) {
    return scale * (2.0 * next_double() - 1.0);
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
    if (bound == 0) throw DimensionError("next_below: bound must be positive");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("random_matrix: zero dimension (" + std::to_string(rows) + "x" +
                             std::to_string(cols) + ")");
    }
    if (!(scale > 0.0)) throw NumericError("random_matrix: scale must be > 0");
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = rng.uniform_symmetric(scale);
    return m;
}

}  // namespace vdsh
