#ifndef VDSH_SUBGRADIENT_HPP
#define VDSH_SUBGRADIENT_HPP

#include <functional>
#include <span>
#include <vector>

#include "vdsh/matrix.hpp"

namespace vdsh {

/// Evaluates the objective at x and writes a subgradient into grad
/// (same length as x). Returns the objective value.
using SubgradObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct SubgradOptions {
    std::size_t max_steps = 10;
    /// Base step length. The step at inner iteration t (1-based) is
    /// base_step / sqrt(t) along the normalized subgradient direction, so
    /// base_step is a displacement budget independent of the objective scale.
    double base_step = 0.5;
};

/// Projected-free subgradient descent with a diminishing step and
/// best-so-far tracking: the returned point is the iterate with the lowest
/// observed objective, never worse than x0. Throws NumericError if the
/// objective evaluates to a non-finite value (including at x0).
std::vector<double> subgradient_minimize(const SubgradObjective& objective,
                                         std::vector<double> x0, const SubgradOptions& opts);

/// Matrix-shaped convenience wrapper over the flat version.
Matrix subgradient_minimize(const SubgradObjective& objective, const Matrix& x0,
                            const SubgradOptions& opts);

}  // namespace vdsh

#endif  // VDSH_SUBGRADIENT_HPP
