#include <functional>
#include <iostream>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "vdsh/cli.hpp"

namespace {

using vdsh::cli::RunConfig;

struct OverrideList {
    std::vector<std::pair<CLI::Option*, std::function<void()>>> items;

    void add(CLI::Option* opt, std::function<void()> copy) {
        items.emplace_back(opt, std::move(copy));
    }

    void apply() const {
        for (const auto& [opt, copy] : items) {
            if (opt->count() > 0) copy();
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vdsh: trains deep ReLU hashing networks layer-by-layer (no backprop), "
                 "encodes data to binary codes, and evaluates Hamming-space retrieval"};
    app.require_subcommand(1);
    app.fallthrough();

    // `flags` receives command-line values; `cfg` is the effective config
    // built as defaults -> JSON config file -> explicit flags.
    RunConfig flags;
    RunConfig cfg;
    std::string config_path;
    OverrideList ov;

    app.add_option("--config", config_path, "JSON config file (flags override file values)");
    ov.add(app.add_option("--seed", flags.seed, "RNG seed"), [&] { cfg.seed = flags.seed; });
    ov.add(app.add_option("--threads", flags.hyper.threads,
                          "worker threads for per-sample phases (default 1, bit-deterministic)"),
           [&] { cfg.hyper.threads = flags.hyper.threads; });

    const auto add_data_options = [&](CLI::App* sub) {
        ov.add(sub->add_option("--data-images", flags.data_images, "IDX image file"),
               [&] { cfg.data_images = flags.data_images; });
        ov.add(sub->add_option("--data-labels", flags.data_labels, "IDX label file"),
               [&] { cfg.data_labels = flags.data_labels; });
        ov.add(sub->add_option("--data-csv", flags.data_csv,
                               "CSV with features then binary label columns"),
               [&] { cfg.data_csv = flags.data_csv; });
        ov.add(sub->add_option("--label-columns", flags.label_columns,
                               "number of trailing label columns in the CSV"),
               [&] { cfg.label_columns = flags.label_columns; });
    };

    CLI::App* train = app.add_subcommand("train", "train a hashing network");
    add_data_options(train);
    ov.add(train->add_option("--dims", flags.dims, "hidden layer widths, last = code bits")
               ->delimiter(','),
           [&] { cfg.dims = flags.dims; });
    ov.add(train->add_option("--alpha-theta", flags.hyper.alpha_theta, "weight regularization"),
           [&] { cfg.hyper.alpha_theta = flags.hyper.alpha_theta; });
    ov.add(train->add_option("--alpha-w", flags.hyper.alpha_w, "classifier regularization"),
           [&] { cfg.hyper.alpha_w = flags.hyper.alpha_w; });
    ov.add(train->add_option("--beta", flags.hyper.beta, "activation dual step"),
           [&] { cfg.hyper.beta = flags.hyper.beta; });
    ov.add(train->add_option("--gamma", flags.hyper.gamma, "weight-copy dual step"),
           [&] { cfg.hyper.gamma = flags.hyper.gamma; });
    ov.add(train->add_option("--subgrad-steps", flags.hyper.subgrad_steps,
                             "inner subgradient steps per subproblem"),
           [&] { cfg.hyper.subgrad_steps = flags.hyper.subgrad_steps; });
    ov.add(train->add_option("--subgrad-base-step", flags.hyper.subgrad_base_step,
                             "base step length for subgradient descent"),
           [&] { cfg.hyper.subgrad_base_step = flags.hyper.subgrad_base_step; });
    ov.add(train->add_option("--max-iterations", flags.hyper.max_iterations, "outer iterations"),
           [&] { cfg.hyper.max_iterations = flags.hyper.max_iterations; });
    ov.add(train->add_option("--convergence-window", flags.hyper.convergence_window,
                             "trailing window for the dual-norm flatness stop"),
           [&] { cfg.hyper.convergence_window = flags.hyper.convergence_window; });
    ov.add(train->add_option("--convergence-rel-tol", flags.hyper.convergence_rel_tol,
                             "relative flatness tolerance (0 disables early stop)"),
           [&] { cfg.hyper.convergence_rel_tol = flags.hyper.convergence_rel_tol; });
    ov.add(train->add_option("--init-scale", flags.hyper.init_scale,
                             "uniform init half-width (0 = sqrt(6/fan_in))"),
           [&] { cfg.hyper.init_scale = flags.hyper.init_scale; });
    ov.add(train->add_flag("--force-subgradient", flags.hyper.force_subgradient,
                           "solve the convex subproblems by subgradient descent too"),
           [&] { cfg.hyper.force_subgradient = flags.hyper.force_subgradient; });
    ov.add(train->add_flag("--parallel-reduce", flags.hyper.parallel_reduce,
                           "chunked global weight reduction (not bit-reproducible)"),
           [&] { cfg.hyper.parallel_reduce = flags.hyper.parallel_reduce; });
    ov.add(train->add_option("--out-weights", flags.out_weights, "weight file to write"),
           [&] { cfg.out_weights = flags.out_weights; });
    ov.add(train->add_option("--out-diagnostics", flags.out_diagnostics,
                             "per-iteration diagnostics CSV"),
           [&] { cfg.out_diagnostics = flags.out_diagnostics; });
    ov.add(train->add_flag("--timing", flags.timing,
                           "record measured wall_ms in diagnostics (default writes 0 so "
                           "identical runs produce identical files)"),
           [&] { cfg.timing = flags.timing; });

    CLI::App* encode = app.add_subcommand("encode", "encode a dataset to packed hash codes");
    add_data_options(encode);
    ov.add(encode->add_option("--weights", flags.weights_path, "trained weight file"),
           [&] { cfg.weights_path = flags.weights_path; });
    ov.add(encode->add_option("--out", flags.out_codes, "code file to write"),
           [&] { cfg.out_codes = flags.out_codes; });

    CLI::App* eval = app.add_subcommand("eval", "evaluate retrieval quality of code files");
    ov.add(eval->add_option("--query-codes", flags.query_codes, "query code file"),
           [&] { cfg.query_codes = flags.query_codes; });
    ov.add(eval->add_option("--db-codes", flags.db_codes, "database code file"),
           [&] { cfg.db_codes = flags.db_codes; });
    ov.add(eval->add_option("--query-labels", flags.query_labels, "query label CSV (0/1)"),
           [&] { cfg.query_labels = flags.query_labels; });
    ov.add(eval->add_option("--db-labels", flags.db_labels, "database label CSV (0/1)"),
           [&] { cfg.db_labels = flags.db_labels; });
    ov.add(eval->add_option("--mode", flags.mode, "single or multi label relevance"),
           [&] { cfg.mode = flags.mode; });
    ov.add(eval->add_option("--out-json", flags.out_json, "also write the report as JSON"),
           [&] { cfg.out_json = flags.out_json; });
    ov.add(eval->add_option("--out-csv", flags.out_csv, "also write the report as CSV"),
           [&] { cfg.out_csv = flags.out_csv; });

    CLI::App* embed = app.add_subcommand("embed", "dump layer activations as CSV");
    add_data_options(embed);
    ov.add(embed->add_option("--weights", flags.weights_path, "trained weight file"),
           [&] { cfg.weights_path = flags.weights_path; });
    ov.add(embed->add_option("--layer", flags.layer, "layer index m in [0, M]"),
           [&] { cfg.layer = flags.layer; });
    ov.add(embed->add_option("--out", flags.out_embed, "CSV file to write"),
           [&] { cfg.out_embed = flags.out_embed; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (!config_path.empty()) vdsh::cli::apply_json_config(cfg, config_path);
        ov.apply();

        if (train->parsed()) {
            vdsh::cli::run_train(cfg);
        } else if (encode->parsed()) {
            vdsh::cli::run_encode(cfg);
        } else if (eval->parsed()) {
            vdsh::cli::run_eval(cfg);
        } else if (embed->parsed()) {
            vdsh::cli::run_embed(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return vdsh::cli::exit_code_for(e);
    }
    return 0;
}
