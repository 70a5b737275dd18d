#ifndef VDSH_MATRIX_HPP
#define VDSH_MATRIX_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vdsh {

/// Dense row-major matrix of doubles. The one matrix type used everywhere:
/// network weights, classifier, data columns, trainer blocks.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool operator==(const Matrix& o) const = default;

    /// True when every entry is finite (no NaN/Inf).
    bool all_finite() const;

    double frobenius_norm() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// y = A x. Throws DimensionError on mismatch.
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);

/// y = A^T x.
void matvec_transpose(const Matrix& a, std::span<const double> x, std::span<double> y);

/// C = A^T A (cols x cols), symmetric by construction.
Matrix gram(const Matrix& a);

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Deterministic, platform-independent 64-bit generator (splitmix64 stream).
/// Identical seed gives an identical stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform double in [0, 1).
    double next_double();
    /// Uniform double in [-scale, scale].
    double uniform_symmetric(double scale);
    /// Uniform integer in [0, bound), bias-free. bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound);

private:
    std::uint64_t state_;
};

/// rows x cols matrix with i.i.d. entries uniform on [-scale, scale],
/// filled in row-major order from rng. Throws on zero dimensions.
Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale);

}  // namespace vdsh

#endif  // VDSH_MATRIX_HPP
