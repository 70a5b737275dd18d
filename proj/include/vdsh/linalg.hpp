#ifndef VDSH_LINALG_HPP
#define VDSH_LINALG_HPP

#include "vdsh/matrix.hpp"

namespace vdsh {

/// Cholesky factor of a symmetric positive-definite matrix, reusable across
/// many right-hand sides. Factorization happens once in the constructor.
class CholeskyFactor {
public:
    /// Factor A = L L^T. A must be square, symmetric within 1e-10, and
    /// positive definite; otherwise DimensionError / NumericError.
    explicit CholeskyFactor(const Matrix& a);

    std::size_t dim() const { return l_.rows(); }

    /// Solve A x = b in place (b holds x on return).
    void solve_in_place(std::span<double> b) const;

    /// Solve A X = B column by column.
    Matrix solve(const Matrix& b) const;

private:
    Matrix l_;  // lower triangular
};

/// Solve A X = B for symmetric positive-definite A.
/// Errors: non-square A, dimension mismatch, asymmetry, non-PD pivot.
Matrix solve_spd(const Matrix& a, const Matrix& b);

}  // namespace vdsh

#endif  // VDSH_LINALG_HPP
