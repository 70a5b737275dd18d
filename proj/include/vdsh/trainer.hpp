#ifndef VDSH_TRAINER_HPP
#define VDSH_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vdsh/dataset.hpp"
#include "vdsh/linalg.hpp"
#include "vdsh/matrix.hpp"
#include "vdsh/network.hpp"

namespace vdsh {

struct Hyperparams {
    double alpha_theta = 1e-2;  // weight regularization
    double alpha_w = 1e-2;      // classifier regularization
    double beta = 0.1;          // dual step for the activation constraints
    double gamma = 0.1;         // dual step for the weight-copy constraints
    std::size_t subgrad_steps = 10;
    double subgrad_base_step = 0.5;
    std::size_t max_iterations = 100;
    std::size_t convergence_window = 10;
    double convergence_rel_tol = 0.05;
    /// Uniform init half-width; 0 selects sqrt(6 / fan_in) per layer.
    double init_scale = 0.0;
    /// Route the convex top-activation and classifier solves through
    /// subgradient descent instead of their closed forms.
    bool force_subgradient = false;
    /// Chunked (unordered) reduction in the global weight average; differs
    /// from the sequential order by at most ~1e-9 on the averaged weights.
    bool parallel_reduce = false;
    std::size_t threads = 1;

    void validate() const;
};

/// One row of convergence diagnostics per outer iteration.
struct DiagnosticsRow {
    std::size_t iteration = 0;         // 1-based
    std::vector<double> mean_u_norm;   // per layer: E_i(beta * ||u_{i,m}||_2)
    std::vector<double> mean_v_norm;   // per layer: E_i(gamma * ||v_{i,m}||_F)
    double objective_eq4 = 0.0;
    double aug_lagrangian = 0.0;
    double wall_time_ms = 0.0;
};

using DiagnosticsSink = std::function<void(const DiagnosticsRow&)>;

/// All coordinate-descent variables. Per-sample blocks are stored
/// sample-major: row i of z[m] is the layer-m activation of sample i, row i
/// of theta_tilde[m] is that sample's flattened local weight copy.
struct TrainerState {
    NetworkWeights weights;  // global weight stack
    Matrix classifier;       // K x C
    Matrix labels;           // N x C, row i = y_i

    std::vector<Matrix> z;            // z[m]: N x D_m, m = 0..M; z[0] rows are the inputs
    std::vector<Matrix> u;            // u[m]: N x D_m, m = 1..M (slot 0 unused)
    std::vector<Matrix> theta_tilde;  // [m]: N x (D_m * D_{m-1}), m = 1..M (slot 0 unused)
    std::vector<Matrix> v;            // same shapes as theta_tilde

    std::size_t sample_count() const { return labels.rows(); }
    std::size_t num_layers() const { return weights.config.num_layers(); }
    const NetworkConfig& config() const { return weights.config; }

    std::span<double> z_row(std::size_t i, std::size_t m) { return z[m].row(i); }
    std::span<const double> z_row(std::size_t i, std::size_t m) const { return z[m].row(i); }
    std::span<double> u_row(std::size_t i, std::size_t m) { return u[m].row(i); }
    std::span<const double> u_row(std::size_t i, std::size_t m) const { return u[m].row(i); }
    std::span<double> theta_tilde_row(std::size_t i, std::size_t m) { return theta_tilde[m].row(i); }
    std::span<const double> theta_tilde_row(std::size_t i, std::size_t m) const {
        return theta_tilde[m].row(i);
    }
    std::span<double> v_row(std::size_t i, std::size_t m) { return v[m].row(i); }
    std::span<const double> v_row(std::size_t i, std::size_t m) const { return v[m].row(i); }

    /// Cache for the shared (W W^T + beta I) factorization used by the
    /// per-sample top-activation solves; keyed by a fingerprint of W and
    /// beta. Copying a state drops the cache; it rebuilds on demand.
    struct TopSolveCache {
        std::uint64_t fingerprint = 0;
        std::unique_ptr<CholeskyFactor> factor;

        TopSolveCache() = default;
        TopSolveCache(const TopSolveCache&) noexcept {}
        TopSolveCache& operator=(const TopSolveCache&) noexcept {
            fingerprint = 0;
            factor.reset();
            return *this;
        }
        TopSolveCache(TopSolveCache&&) = default;
        TopSolveCache& operator=(TopSolveCache&&) = default;
    };
    TopSolveCache top_cache;
};

/// Random global weights and classifier; local copies equal to the global
/// weights; activations from a forward pass; all duals zero. The constraint
/// residuals are exactly zero by construction.
TrainerState init_state(const LabeledDataset& dataset, const NetworkConfig& config,
                        const Hyperparams& hyper, Rng& rng);

/// z_{i,M} <- argmin 1/2 ||W^T z - y_i||^2 + beta/2 ||z - f + u||^2, where
/// f is the local forward of layer M. Closed form unless force_subgradient.
void update_top_z(TrainerState& state, const Hyperparams& hyper, std::size_t i);

/// u_{i,m} += z_{i,m} - f(z_{i,m-1}; theta_tilde_i^(m)).
void update_dual_u(TrainerState& state, std::size_t i, std::size_t m);

/// z_{i,m} for 1 <= m <= M-1: subgradient descent on
/// ||z - f_m + u_m||^2 + ||z_{m+1} - f(z; tt^(m+1)) + u_{m+1}||^2, warm
/// started at the current value. Exact when layer m+1 weights are all zero.
void update_mid_z(TrainerState& state, const Hyperparams& hyper, std::size_t i, std::size_t m);

/// theta_tilde_i^(m): subgradient descent on beta*G + gamma*Q, warm started.
/// Exact (theta + v) when beta is zero or the layer input is all zero.
void update_theta_tilde(TrainerState& state, const Hyperparams& hyper, std::size_t i,
                        std::size_t m);

/// theta^(m) = gamma / (gamma N + alpha_theta) * sum_i (tt_i^(m) - v_{i,m}).
void update_theta_global(TrainerState& state, const Hyperparams& hyper, std::size_t m);

/// v_{i,m} += theta^(m) - theta_tilde_i^(m).
void update_dual_v(TrainerState& state, std::size_t i, std::size_t m);

/// W <- argmin alpha_W/2 ||W||_F^2 + 1/2 sum_i ||W^T z_{i,M} - y_i||^2.
void update_classifier(TrainerState& state, const Hyperparams& hyper);

/// Regularized classification loss of the actual network outputs
/// (forward passes, not the auxiliary activations).
double objective_eq4(const NetworkWeights& weights, const Matrix& classifier,
                     const LabeledDataset& dataset, const Hyperparams& hyper);

/// Full augmented Lagrangian over the trainer state.
double augmented_lagrangian_eq8(const TrainerState& state, const Hyperparams& hyper);

struct TrainResult {
    NetworkWeights weights;
    Matrix classifier;
    std::size_t iterations_run = 0;
};

/// Full coordinate-descent training loop: per-sample top solve and dual,
/// backward activation sweep, per-layer local weight fits with global
/// averaging and duals, classifier refit; one DiagnosticsRow per iteration.
/// Stops at max_iterations or when every layer's mean dual norm is flat to
/// convergence_rel_tol over the trailing convergence_window iterations.
TrainResult train(const LabeledDataset& dataset, const NetworkConfig& config,
                  const Hyperparams& hyper, Rng& rng, const DiagnosticsSink& sink = {});

}  // namespace vdsh

#endif  // VDSH_TRAINER_HPP
