#include "vdsh/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>

#include "vdsh/errors.hpp"
#include "vdsh/subgradient_impl.hpp"

namespace vdsh {

namespace {

// f = max(0, Theta z) with Theta given as a flat row-major block.
inline void relu_forward_flat(std::span<const double> theta, std::size_t rows, std::size_t cols,
                              std::span<const double> zin, std::span<double> out) {
    const double* row = theta.data();
    for (std::size_t r = 0; r < rows; ++r, row += cols) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * zin[c];
        out[r] = acc > 0.0 ? acc : 0.0;
    }
}

inline bool all_zero(std::span<const double> x) {
    for (double v : x) {
        if (v != 0.0) return false;
    }
    return true;
}

// Per-thread scratch sized once for the largest layer.
struct Workspace {
    std::vector<double> f;       // layer outputs / targets
    std::vector<double> aux;     // secondary vector buffer
    std::vector<double> pre;     // pre-activations / masked residuals
    std::vector<double> anchor;  // theta + v target block
    std::vector<double> grad;
    std::vector<double> best;

    explicit Workspace(const NetworkConfig& cfg) {
        std::size_t max_d = std::max(cfg.input_dim, cfg.num_classes);
        std::size_t max_block = cfg.code_bits() * cfg.num_classes;
        for (std::size_t m = 1; m <= cfg.num_layers(); ++m) {
            max_d = std::max(max_d, cfg.dim(m));
            max_block = std::max(max_block, cfg.dim(m) * cfg.dim(m - 1));
        }
        f.resize(max_d);
        aux.resize(max_d);
        pre.resize(max_d);
        anchor.resize(max_block);
        grad.resize(std::max(max_block, max_d));
        best.resize(std::max(max_block, max_d));
    }
};

std::uint64_t fingerprint_classifier(const Matrix& w, double beta) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    const auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix(w.data(), w.size() * sizeof(double));
    mix(&beta, sizeof(beta));
    const std::uint64_t shape[2] = {w.rows(), w.cols()};
    mix(shape, sizeof(shape));
    return h;
}

// Rebuilds the shared (W W^T + beta I) factorization when W or beta changed.
// Must be called from a single thread before any concurrent top solves.
void ensure_top_factor(TrainerState& s, const Hyperparams& hp) {
    const std::uint64_t fp = fingerprint_classifier(s.classifier, hp.beta);
    if (s.top_cache.factor && s.top_cache.fingerprint == fp) return;
    const std::size_t k = s.classifier.rows();
    Matrix a(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double d = dot(s.classifier.row(i), s.classifier.row(j));
            a(i, j) = d;
            a(j, i) = d;
        }
        a(i, i) += hp.beta;
    }
    s.top_cache.factor = std::make_unique<CholeskyFactor>(a);
    s.top_cache.fingerprint = fp;
}

void check_sample(const TrainerState& s, std::size_t i) {
    if (i >= s.sample_count()) {
        throw DimensionError("sample index " + std::to_string(i) + " out of range (N = " +
                             std::to_string(s.sample_count()) + ")");
    }
}

void check_layer(const TrainerState& s, std::size_t m, std::size_t lo, std::size_t hi) {
    if (m < lo || m > hi) {
        throw DimensionError("layer index " + std::to_string(m) + " outside [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

void update_top_z_ws(TrainerState& s, const Hyperparams& hp, std::size_t i, Workspace& ws) {
    const std::size_t mm = s.num_layers();
    const std::size_t k = s.config().code_bits();
    const std::size_t c = s.config().num_classes;
    const auto f = std::span<double>(ws.f.data(), k);
    relu_forward_flat(s.theta_tilde_row(i, mm), k, s.config().dim(mm - 1), s.z_row(i, mm - 1), f);
    const auto u = s.u_row(i, mm);
    const auto y = s.labels.row(i);
    const auto z = s.z_row(i, mm);

    if (!hp.force_subgradient) {
        ensure_top_factor(s, hp);
        for (std::size_t r = 0; r < k; ++r) {
            z[r] = dot(s.classifier.row(r), y) + hp.beta * (f[r] - u[r]);
        }
        s.top_cache.factor->solve_in_place(z);
        return;
    }

    const auto objective = [&](std::span<const double> zz, std::span<double> g) {
        const auto pred = std::span<double>(ws.aux.data(), c);
        std::fill(pred.begin(), pred.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const auto wrow = s.classifier.row(r);
            for (std::size_t j = 0; j < c; ++j) pred[j] += wrow[j] * zz[r];
        }
        double loss = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            pred[j] -= y[j];
            loss += pred[j] * pred[j];
        }
        double pen = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double d = zz[r] - f[r] + u[r];
            pen += d * d;
            g[r] = dot(s.classifier.row(r), pred) + hp.beta * d;
        }
        return 0.5 * loss + 0.5 * hp.beta * pen;
    };
    detail::subgradient_minimize_in_place(objective, z, std::span<double>(ws.grad.data(), k),
                                          std::span<double>(ws.best.data(), k),
                                          {hp.subgrad_steps, hp.subgrad_base_step});
}

void update_dual_u_ws(TrainerState& s, std::size_t i, std::size_t m, Workspace& ws) {
    const std::size_t dm = s.config().dim(m);
    const auto f = std::span<double>(ws.f.data(), dm);
    relu_forward_flat(s.theta_tilde_row(i, m), dm, s.config().dim(m - 1), s.z_row(i, m - 1), f);
    const auto z = s.z_row(i, m);
    const auto u = s.u_row(i, m);
    for (std::size_t r = 0; r < dm; ++r) u[r] += z[r] - f[r];
}

void update_mid_z_ws(TrainerState& s, const Hyperparams& hp, std::size_t i, std::size_t m,
                     Workspace& ws) {
    const std::size_t dm = s.config().dim(m);
    const std::size_t dnext = s.config().dim(m + 1);

    // first term target: a = f(z_{m-1}; tt^(m)) - u_m
    const auto a = std::span<double>(ws.aux.data(), dm);
    relu_forward_flat(s.theta_tilde_row(i, m), dm, s.config().dim(m - 1), s.z_row(i, m - 1), a);
    {
        const auto u = s.u_row(i, m);
        for (std::size_t r = 0; r < dm; ++r) a[r] -= u[r];
    }
    // second term target: c = z_{m+1} + u_{m+1}
    const auto ctgt = std::span<double>(ws.f.data(), dnext);
    {
        const auto znext = s.z_row(i, m + 1);
        const auto unext = s.u_row(i, m + 1);
        for (std::size_t r = 0; r < dnext; ++r) ctgt[r] = znext[r] + unext[r];
    }

    const auto theta_next = s.theta_tilde_row(i, m + 1);
    const auto z = s.z_row(i, m);
    if (all_zero(theta_next)) {
        // second term is constant, the first is an exact quadratic
        std::copy(a.begin(), a.end(), z.begin());
        return;
    }

    const auto objective = [&](std::span<const double> zz, std::span<double> g) {
        double val = 0.0;
        for (std::size_t r = 0; r < dm; ++r) {
            const double d = zz[r] - a[r];
            val += d * d;
            g[r] = 2.0 * d;
        }
        const double* row = theta_next.data();
        for (std::size_t r = 0; r < dnext; ++r, row += dm) {
            double acc = 0.0;
            for (std::size_t c2 = 0; c2 < dm; ++c2) acc += row[c2] * zz[c2];
            if (acc > 0.0) {
                const double resid = ctgt[r] - acc;
                val += resid * resid;
                const double scale = -2.0 * resid;
                for (std::size_t c2 = 0; c2 < dm; ++c2) g[c2] += scale * row[c2];
            } else {
                val += ctgt[r] * ctgt[r];
            }
        }
        return val;
    };
    detail::subgradient_minimize_in_place(objective, z, std::span<double>(ws.grad.data(), dm),
                                          std::span<double>(ws.best.data(), dm),
                                          {hp.subgrad_steps, hp.subgrad_base_step});
}

void update_theta_tilde_ws(TrainerState& s, const Hyperparams& hp, std::size_t i, std::size_t m,
                           Workspace& ws) {
    const std::size_t din = s.config().dim(m - 1);
    const std::size_t dout = s.config().dim(m);
    const std::size_t block = dout * din;
    const auto zin = s.z_row(i, m - 1);
    const auto tt = s.theta_tilde_row(i, m);

    // anchor = theta^(m) + v_{i,m}
    const auto anchor = std::span<double>(ws.anchor.data(), block);
    {
        const auto theta = s.weights.layer(m).flat();
        const auto v = s.v_row(i, m);
        for (std::size_t j = 0; j < block; ++j) anchor[j] = theta[j] + v[j];
    }

    if (hp.beta == 0.0 || all_zero(zin)) {
        // the data-fit term is constant; the remaining quadratic peaks at the anchor
        std::copy(anchor.begin(), anchor.end(), tt.begin());
        return;
    }

    // target of the fit term: t = z_m + u_m
    const auto tgt = std::span<double>(ws.f.data(), dout);
    {
        const auto z = s.z_row(i, m);
        const auto u = s.u_row(i, m);
        for (std::size_t r = 0; r < dout; ++r) tgt[r] = z[r] + u[r];
    }

    const auto objective = [&](std::span<const double> th, std::span<double> g) {
        double fit = 0.0;
        const auto masked = std::span<double>(ws.pre.data(), dout);
        const double* row = th.data();
        for (std::size_t r = 0; r < dout; ++r, row += din) {
            double acc = 0.0;
            for (std::size_t c2 = 0; c2 < din; ++c2) acc += row[c2] * zin[c2];
            const double resid = tgt[r] - (acc > 0.0 ? acc : 0.0);
            fit += resid * resid;
            masked[r] = acc > 0.0 ? resid : 0.0;
        }
        double near = 0.0;
        for (std::size_t r = 0; r < dout; ++r) {
            const double mscale = -2.0 * hp.beta * masked[r];
            double* grow = g.data() + r * din;
            const double* trow = th.data() + r * din;
            const double* arow = anchor.data() + r * din;
            for (std::size_t c2 = 0; c2 < din; ++c2) {
                const double dq = trow[c2] - arow[c2];
                near += dq * dq;
                grow[c2] = mscale * zin[c2] + 2.0 * hp.gamma * dq;
            }
        }
        return hp.beta * fit + hp.gamma * near;
    };
    detail::subgradient_minimize_in_place(objective, tt, std::span<double>(ws.grad.data(), block),
                                          std::span<double>(ws.best.data(), block),
                                          {hp.subgrad_steps, hp.subgrad_base_step});
}

void update_theta_global_impl(TrainerState& s, const Hyperparams& hp, std::size_t m) {
    const std::size_t n = s.sample_count();
    const double denom = hp.gamma * static_cast<double>(n) + hp.alpha_theta;
    if (denom == 0.0) {
        throw NumericError("update_theta_global: gamma*N + alpha_theta is zero");
    }
    const double scale = hp.gamma / denom;
    const auto theta = s.weights.layer(m).flat();
    const std::size_t block = theta.size();
    std::fill(theta.begin(), theta.end(), 0.0);

    if (!hp.parallel_reduce || hp.threads <= 1 || n < 2) {
        // sequential by sample index: bit-deterministic
        for (std::size_t i = 0; i < n; ++i) {
            const auto tt = s.theta_tilde_row(i, m);
            const auto v = s.v_row(i, m);
            for (std::size_t j = 0; j < block; ++j) theta[j] += tt[j] - v[j];
        }
    } else {
        const std::size_t chunks = std::min(hp.threads, n);
        std::vector<std::vector<double>> partial(chunks, std::vector<double>(block, 0.0));
        std::vector<std::thread> pool;
        pool.reserve(chunks);
        for (std::size_t t = 0; t < chunks; ++t) {
            pool.emplace_back([&, t] {
                const std::size_t lo = n * t / chunks;
                const std::size_t hi = n * (t + 1) / chunks;
                auto& acc = partial[t];
                for (std::size_t i = lo; i < hi; ++i) {
                    const auto tt = s.theta_tilde_row(i, m);
                    const auto v = s.v_row(i, m);
                    for (std::size_t j = 0; j < block; ++j) acc[j] += tt[j] - v[j];
                }
            });
        }
        for (auto& th : pool) th.join();
        for (std::size_t t = 0; t < chunks; ++t) {
            for (std::size_t j = 0; j < block; ++j) theta[j] += partial[t][j];
        }
    }
    for (std::size_t j = 0; j < block; ++j) theta[j] *= scale;
}

void update_dual_v_impl(TrainerState& s, std::size_t i, std::size_t m) {
    const auto theta = s.weights.layer(m).flat();
    const auto tt = s.theta_tilde_row(i, m);
    const auto v = s.v_row(i, m);
    for (std::size_t j = 0; j < theta.size(); ++j) v[j] += theta[j] - tt[j];
}

// fn(thread_index, sample_index); exceptions from workers are rethrown once.
template <typename Fn>
void for_each_sample(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(0, i);
        return;
    }
    const std::size_t t = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    for (std::size_t tid = 0; tid < t; ++tid) {
        pool.emplace_back([&, tid] {
            const std::size_t lo = n * tid / t;
            const std::size_t hi = n * (tid + 1) / t;
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    if (failed.load(std::memory_order_relaxed)) return;
                    fn(tid, i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

void Hyperparams::validate() const {
    const double reals[] = {alpha_theta, alpha_w,   beta,
                            gamma,       init_scale, subgrad_base_step,
                            convergence_rel_tol};
    for (double r : reals) {
        if (!std::isfinite(r)) throw NumericError("hyperparameter is not finite");
    }
    if (alpha_theta < 0.0 || alpha_w < 0.0) {
        throw NumericError("alpha_theta and alpha_w must be >= 0");
    }
    if (!(beta > 0.0)) throw NumericError("beta must be > 0");
    if (!(gamma > 0.0)) throw NumericError("gamma must be > 0");
    if (subgrad_steps == 0) throw DimensionError("subgrad_steps must be >= 1");
    if (!(subgrad_base_step > 0.0)) throw NumericError("subgrad_base_step must be > 0");
    if (convergence_window == 0) throw DimensionError("convergence_window must be >= 1");
    if (convergence_rel_tol < 0.0) throw NumericError("convergence_rel_tol must be >= 0");
    if (init_scale < 0.0) throw NumericError("init_scale must be >= 0");
    if (threads == 0) throw DimensionError("threads must be >= 1");
}

TrainerState init_state(const LabeledDataset& dataset, const NetworkConfig& config,
                        const Hyperparams& hyper, Rng& rng) {
    config.validate();
    dataset.validate();
    if (config.input_dim != dataset.dim()) {
        throw DimensionError("config input_dim " + std::to_string(config.input_dim) +
                             " != dataset dimension " + std::to_string(dataset.dim()));
    }
    if (config.num_classes != dataset.num_classes()) {
        throw DimensionError("config num_classes " + std::to_string(config.num_classes) +
                             " != dataset classes " + std::to_string(dataset.num_classes()));
    }
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        double sq = 0.0;
        for (std::size_t r = 0; r < dataset.dim(); ++r) sq += dataset.x(r, i) * dataset.x(r, i);
        if (std::abs(sq - 1.0) > 1e-6) {
            throw NumericError("init_state: dataset column " + std::to_string(i) +
                               " is not unit-normalized");
        }
    }

    const std::size_t n = dataset.count();
    const std::size_t m_layers = config.num_layers();
    TrainerState s;
    s.weights.config = config;
    for (std::size_t m = 1; m <= m_layers; ++m) {
        const double scale = hyper.init_scale > 0.0
                                 ? hyper.init_scale
                                 : std::sqrt(6.0 / static_cast<double>(config.dim(m - 1)));
        s.weights.layers.push_back(random_matrix(rng, config.dim(m), config.dim(m - 1), scale));
    }
    {
        const double wscale = hyper.init_scale > 0.0
                                  ? hyper.init_scale
                                  : std::sqrt(6.0 / static_cast<double>(config.code_bits()));
        s.classifier = random_matrix(rng, config.code_bits(), config.num_classes, wscale);
    }

    s.labels = Matrix(n, config.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < config.num_classes; ++c) s.labels(i, c) = dataset.y(c, i);
    }

    s.z.resize(m_layers + 1);
    s.u.resize(m_layers + 1);
    s.theta_tilde.resize(m_layers + 1);
    s.v.resize(m_layers + 1);

    s.z[0] = Matrix(n, config.input_dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < config.input_dim; ++r) s.z[0](i, r) = dataset.x(r, i);
    }

    for (std::size_t m = 1; m <= m_layers; ++m) {
        const std::size_t block = config.dim(m) * config.dim(m - 1);
        s.theta_tilde[m] = Matrix(n, block);
        s.v[m] = Matrix(n, block);
        s.z[m] = Matrix(n, config.dim(m));
        s.u[m] = Matrix(n, config.dim(m));
        const auto theta = s.weights.layer(m).flat();
        for (std::size_t i = 0; i < n; ++i) {
            const auto tt = s.theta_tilde_row(i, m);
            std::copy(theta.begin(), theta.end(), tt.begin());
            relu_forward_flat(tt, config.dim(m), config.dim(m - 1), s.z_row(i, m - 1),
                              s.z_row(i, m));
        }
    }
    return s;
}

void update_top_z(TrainerState& state, const Hyperparams& hyper, std::size_t i) {
    check_sample(state, i);
    Workspace ws(state.config());
    update_top_z_ws(state, hyper, i, ws);
}

void update_dual_u(TrainerState& state, std::size_t i, std::size_t m) {
    check_sample(state, i);
    check_layer(state, m, 1, state.num_layers());
    Workspace ws(state.config());
    update_dual_u_ws(state, i, m, ws);
}

void update_mid_z(TrainerState& state, const Hyperparams& hyper, std::size_t i, std::size_t m) {
    check_sample(state, i);
    if (state.num_layers() < 2) {
        throw DimensionError("update_mid_z: network has no middle layers");
    }
    check_layer(state, m, 1, state.num_layers() - 1);
    Workspace ws(state.config());
    update_mid_z_ws(state, hyper, i, m, ws);
}

void update_theta_tilde(TrainerState& state, const Hyperparams& hyper, std::size_t i,
                        std::size_t m) {
    check_sample(state, i);
    check_layer(state, m, 1, state.num_layers());
    Workspace ws(state.config());
    update_theta_tilde_ws(state, hyper, i, m, ws);
}

void update_theta_global(TrainerState& state, const Hyperparams& hyper, std::size_t m) {
    check_layer(state, m, 1, state.num_layers());
    update_theta_global_impl(state, hyper, m);
}

void update_dual_v(TrainerState& state, std::size_t i, std::size_t m) {
    check_sample(state, i);
    check_layer(state, m, 1, state.num_layers());
    update_dual_v_impl(state, i, m);
}

void update_classifier(TrainerState& state, const Hyperparams& hyper) {
    const std::size_t mm = state.num_layers();
    const std::size_t k = state.config().code_bits();
    const std::size_t c = state.config().num_classes;
    const std::size_t n = state.sample_count();

    if (!hyper.force_subgradient) {
        Matrix a = gram(state.z[mm]);  // sum_i z z^T
        for (std::size_t r = 0; r < k; ++r) a(r, r) += hyper.alpha_w;
        Matrix rhs(k, c);
        for (std::size_t i = 0; i < n; ++i) {
            const auto z = state.z_row(i, mm);
            const auto y = state.labels.row(i);
            for (std::size_t r = 0; r < k; ++r) {
                const double zr = z[r];
                if (zr == 0.0) continue;
                double* rrow = &rhs(r, 0);
                for (std::size_t j = 0; j < c; ++j) rrow[j] += zr * y[j];
            }
        }
        try {
            state.classifier = solve_spd(a, rhs);
        } catch (const NumericError& e) {
            if (hyper.alpha_w == 0.0) {
                throw NumericError(std::string(e.what()) +
                                   " (activation Gram matrix is singular; set alpha_w > 0)");
            }
            throw;
        }
        return;
    }

    const std::size_t block = k * c;
    std::vector<double> w(state.classifier.flat().begin(), state.classifier.flat().end());
    std::vector<double> grad(block);
    std::vector<double> best(block);
    std::vector<double> pred(c);
    const auto objective = [&](std::span<const double> wf, std::span<double> g) {
        double val = 0.0;
        for (std::size_t j = 0; j < block; ++j) {
            val += 0.5 * hyper.alpha_w * wf[j] * wf[j];
            g[j] = hyper.alpha_w * wf[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto z = state.z_row(i, mm);
            const auto y = state.labels.row(i);
            std::fill(pred.begin(), pred.end(), 0.0);
            for (std::size_t r = 0; r < k; ++r) {
                const double zr = z[r];
                const double* wrow = wf.data() + r * c;
                for (std::size_t j = 0; j < c; ++j) pred[j] += zr * wrow[j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                pred[j] -= y[j];
                val += 0.5 * pred[j] * pred[j];
            }
            for (std::size_t r = 0; r < k; ++r) {
                const double zr = z[r];
                if (zr == 0.0) continue;
                double* grow = g.data() + r * c;
                for (std::size_t j = 0; j < c; ++j) grow[j] += zr * pred[j];
            }
        }
        return val;
    };
    detail::subgradient_minimize_in_place(objective, std::span<double>(w),
                                          std::span<double>(grad), std::span<double>(best),
                                          {hyper.subgrad_steps, hyper.subgrad_base_step});
    state.classifier = Matrix(k, c, std::move(w));
}

double objective_eq4(const NetworkWeights& weights, const Matrix& classifier,
                     const LabeledDataset& dataset, const Hyperparams& hyper) {
    weights.validate();
    const std::size_t k = weights.config.code_bits();
    const std::size_t c = weights.config.num_classes;
    if (classifier.rows() != k || classifier.cols() != c) {
        throw DimensionError("objective_eq4: classifier shape mismatch");
    }
    if (dataset.dim() != weights.config.input_dim || dataset.num_classes() != c) {
        throw DimensionError("objective_eq4: dataset shape mismatch");
    }

    std::size_t max_d = weights.config.input_dim;
    for (std::size_t m = 1; m <= weights.config.num_layers(); ++m) {
        max_d = std::max(max_d, weights.config.dim(m));
    }
    std::vector<double> cur(max_d), next(max_d), pred(c);

    double loss = 0.0;
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        for (std::size_t r = 0; r < dataset.dim(); ++r) cur[r] = dataset.x(r, i);
        std::size_t width = dataset.dim();
        for (std::size_t m = 1; m <= weights.config.num_layers(); ++m) {
            const std::size_t out_w = weights.config.dim(m);
            relu_forward_flat(weights.layer(m).flat(), out_w, width,
                              std::span<const double>(cur.data(), width),
                              std::span<double>(next.data(), out_w));
            cur.swap(next);
            width = out_w;
        }
        std::fill(pred.begin(), pred.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const double zr = cur[r];
            if (zr == 0.0) continue;
            const double* wrow = classifier.row(r).data();
            for (std::size_t j = 0; j < c; ++j) pred[j] += zr * wrow[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            const double d = pred[j] - dataset.y(j, i);
            loss += d * d;
        }
    }
    double reg = 0.0;
    for (std::size_t m = 1; m <= weights.config.num_layers(); ++m) {
        for (double v : weights.layer(m).flat()) reg += hyper.alpha_theta * v * v;
    }
    for (double v : classifier.flat()) reg += hyper.alpha_w * v * v;
    return 0.5 * loss + 0.5 * reg;
}

double augmented_lagrangian_eq8(const TrainerState& state, const Hyperparams& hyper) {
    const std::size_t mm = state.num_layers();
    const std::size_t k = state.config().code_bits();
    const std::size_t c = state.config().num_classes;
    const std::size_t n = state.sample_count();

    std::vector<double> pred(c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto z = state.z_row(i, mm);
        std::fill(pred.begin(), pred.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const double zr = z[r];
            if (zr == 0.0) continue;
            const double* wrow = state.classifier.row(r).data();
            for (std::size_t j = 0; j < c; ++j) pred[j] += zr * wrow[j];
        }
        const auto y = state.labels.row(i);
        for (std::size_t j = 0; j < c; ++j) {
            const double d = pred[j] - y[j];
            loss += d * d;
        }
    }

    double reg = 0.0;
    for (std::size_t m = 1; m <= mm; ++m) {
        for (double v : state.weights.layer(m).flat()) reg += hyper.alpha_theta * v * v;
    }
    for (double v : state.classifier.flat()) reg += hyper.alpha_w * v * v;

    std::size_t max_d = 0;
    for (std::size_t m = 1; m <= mm; ++m) max_d = std::max(max_d, state.config().dim(m));
    std::vector<double> f(max_d);

    double z_pen = 0.0;
    for (std::size_t m = 1; m <= mm; ++m) {
        const std::size_t dm = state.config().dim(m);
        for (std::size_t i = 0; i < n; ++i) {
            relu_forward_flat(state.theta_tilde_row(i, m), dm, state.config().dim(m - 1),
                              state.z_row(i, m - 1), std::span<double>(f.data(), dm));
            const auto z = state.z_row(i, m);
            const auto u = state.u_row(i, m);
            for (std::size_t r = 0; r < dm; ++r) {
                const double d = z[r] - f[r] + u[r];
                z_pen += d * d;
            }
        }
    }

    double t_pen = 0.0;
    for (std::size_t m = 1; m <= mm; ++m) {
        const auto theta = state.weights.layer(m).flat();
        for (std::size_t i = 0; i < n; ++i) {
            const auto tt = state.theta_tilde_row(i, m);
            const auto v = state.v_row(i, m);
            for (std::size_t j = 0; j < theta.size(); ++j) {
                const double d = theta[j] - tt[j] + v[j];
                t_pen += d * d;
            }
        }
    }

    return 0.5 * loss + 0.5 * reg + 0.5 * hyper.beta * z_pen + 0.5 * hyper.gamma * t_pen;
}

TrainResult train(const LabeledDataset& dataset, const NetworkConfig& config,
                  const Hyperparams& hyper, Rng& rng, const DiagnosticsSink& sink) {
    hyper.validate();
    TrainerState state = init_state(dataset, config, hyper, rng);

    const std::size_t n = state.sample_count();
    const std::size_t mm = state.num_layers();
    std::vector<Workspace> ws;
    ws.reserve(hyper.threads);
    for (std::size_t t = 0; t < hyper.threads; ++t) ws.emplace_back(config);

    std::vector<std::vector<double>> u_history;  // per iteration, per layer

    std::size_t iterations = 0;
    for (std::size_t iter = 1; iter <= hyper.max_iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        // top layer: closed-form (or forced subgradient) solve, then dual
        ensure_top_factor(state, hyper);
        for_each_sample(n, hyper.threads, [&](std::size_t tid, std::size_t i) {
            update_top_z_ws(state, hyper, i, ws[tid]);
            update_dual_u_ws(state, i, mm, ws[tid]);
        });

        // backward sweep over middle layers
        for (std::size_t m = mm - 1; m >= 1; --m) {
            for_each_sample(n, hyper.threads, [&](std::size_t tid, std::size_t i) {
                update_mid_z_ws(state, hyper, i, m, ws[tid]);
            });
            for_each_sample(n, hyper.threads, [&](std::size_t tid, std::size_t i) {
                update_dual_u_ws(state, i, m, ws[tid]);
            });
            if (m == 1) break;
        }

        // local weight fits, global average, dual
        for (std::size_t m = 1; m <= mm; ++m) {
            for_each_sample(n, hyper.threads, [&](std::size_t tid, std::size_t i) {
                update_theta_tilde_ws(state, hyper, i, m, ws[tid]);
            });
            update_theta_global_impl(state, hyper, m);
            for_each_sample(n, hyper.threads, [&](std::size_t tid, std::size_t i) {
                update_dual_v_impl(state, i, m);
            });
        }

        update_classifier(state, hyper);
        ++iterations;

        DiagnosticsRow row;
        row.iteration = iter;
        row.mean_u_norm.resize(mm);
        row.mean_v_norm.resize(mm);
        for (std::size_t m = 1; m <= mm; ++m) {
            double usum = 0.0, vsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                usum += norm2(state.u_row(i, m));
                vsum += norm2(state.v_row(i, m));
            }
            row.mean_u_norm[m - 1] = hyper.beta * usum / static_cast<double>(n);
            row.mean_v_norm[m - 1] = hyper.gamma * vsum / static_cast<double>(n);
            if (!std::isfinite(row.mean_u_norm[m - 1]) || !std::isfinite(row.mean_v_norm[m - 1])) {
                throw NumericError("training diverged: non-finite dual norms at iteration " +
                                   std::to_string(iter));
            }
        }
        row.objective_eq4 = objective_eq4(state.weights, state.classifier, dataset, hyper);
        row.aug_lagrangian = augmented_lagrangian_eq8(state, hyper);
        if (!std::isfinite(row.objective_eq4) || !std::isfinite(row.aug_lagrangian)) {
            throw NumericError("training diverged: non-finite objective at iteration " +
                               std::to_string(iter));
        }
        row.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        if (sink) sink(row);

        u_history.push_back(row.mean_u_norm);
        if (hyper.convergence_rel_tol > 0.0 && u_history.size() >= hyper.convergence_window) {
            bool flat = true;
            const std::size_t lo = u_history.size() - hyper.convergence_window;
            for (std::size_t m = 0; m < mm && flat; ++m) {
                double mx = 0.0, mn = std::numeric_limits<double>::infinity();
                for (std::size_t t = lo; t < u_history.size(); ++t) {
                    mx = std::max(mx, u_history[t][m]);
                    mn = std::min(mn, u_history[t][m]);
                }
                if (mx > 0.0 && (mx - mn) >= hyper.convergence_rel_tol * mx) flat = false;
            }
            if (flat) break;
        }
    }

    return {std::move(state.weights), std::move(state.classifier), iterations};
}

}  // namespace vdsh
