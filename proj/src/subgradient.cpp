#include "vdsh/subgradient.hpp"

#include "vdsh/errors.hpp"
#include "vdsh/subgradient_impl.hpp"

namespace vdsh {

std::vector<double> subgradient_minimize(const SubgradObjective& objective,
                                         std::vector<double> x0, const SubgradOptions& opts) {
    std::vector<double> grad(x0.size());
    std::vector<double> best(x0.size());
    detail::subgradient_minimize_in_place(objective, std::span<double>(x0),
                                          std::span<double>(grad), std::span<double>(best),
                                          opts);
    return x0;
}

Matrix subgradient_minimize(const SubgradObjective& objective, const Matrix& x0,
                            const SubgradOptions& opts) {
    std::vector<double> flat(x0.flat().begin(), x0.flat().end());
    flat = subgradient_minimize(objective, std::move(flat), opts);
    return Matrix(x0.rows(), x0.cols(), std::move(flat));
}

}  // namespace vdsh
