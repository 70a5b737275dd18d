#ifndef VDSH_SUBGRADIENT_IMPL_HPP
#define VDSH_SUBGRADIENT_IMPL_HPP

#include <algorithm>
#include <cmath>
#include <span>

#include "vdsh/errors.hpp"
#include "vdsh/subgradient.hpp"

namespace vdsh::detail {

/// Allocation-free core behind subgradient_minimize. x holds the warm start
/// and receives the best-so-far iterate; grad and best are caller-provided
/// scratch of x.size(). Templated on the callable so per-sample trainer loops
/// pay no std::function overhead.
template <typename F>
void subgradient_minimize_in_place(F&& objective, std::span<double> x, std::span<double> grad,
                                   std::span<double> best, const SubgradOptions& opts) {
    const std::size_t n = x.size();
    double f_cur = objective(std::span<const double>(x.data(), n), grad);
    if (!std::isfinite(f_cur)) {
        throw NumericError("subgradient_minimize: objective non-finite at start point");
    }
    std::copy(x.begin(), x.end(), best.begin());
    double f_best = f_cur;

    for (std::size_t t = 1; t <= opts.max_steps; ++t) {
        double gsq = 0.0;
        for (double g : grad) gsq += g * g;
        if (gsq == 0.0) break;  // stationary for the current subgradient choice
        const double step = opts.base_step / (std::sqrt(static_cast<double>(t)) * std::sqrt(gsq));
        for (std::size_t i = 0; i < n; ++i) x[i] -= step * grad[i];

        f_cur = objective(std::span<const double>(x.data(), n), grad);
        if (!std::isfinite(f_cur)) {
            throw NumericError("subgradient_minimize: objective non-finite at step " +
                               std::to_string(t));
        }
        if (f_cur < f_best) {
            f_best = f_cur;
            std::copy(x.begin(), x.end(), best.begin());
        }
    }
    std::copy(best.begin(), best.end(), x.begin());
}

}  // namespace vdsh::detail

#endif  // VDSH_SUBGRADIENT_IMPL_HPP
