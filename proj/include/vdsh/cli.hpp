#ifndef VDSH_CLI_HPP
#define VDSH_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vdsh/dataset.hpp"
#include "vdsh/errors.hpp"
#include "vdsh/retrieval.hpp"
#include "vdsh/trainer.hpp"

namespace vdsh::cli {

/// Invalid flag combinations and similar command-line misuse (exit code 2).
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

/// Fully validated run configuration. The JSON config file uses exactly
/// these field names; command-line flags override file values.
struct RunConfig {
    // dataset source: either the IDX pair or a CSV
    std::string data_images;
    std::string data_labels;
    std::string data_csv;
    std::size_t label_columns = 1;

    std::vector<std::size_t> dims;  // hidden layer widths, last one = code bits
    Hyperparams hyper;
    std::uint64_t seed = 1;

    std::string out_weights;
    std::string out_diagnostics;
    bool timing = false;  // write measured wall_ms instead of 0

    std::string weights_path;
    std::string out_codes;

    std::string query_codes;
    std::string db_codes;
    std::string query_labels;
    std::string db_labels;
    std::string mode = "single";  // or "multi"
    std::string out_json;
    std::string out_csv;

    std::size_t layer = 0;
    std::string out_embed;
};

/// Applies the flat JSON object at path onto config (unknown keys are an
/// error). Fields not present keep their current values.
void apply_json_config(RunConfig& config, const std::string& path);

/// Loads and normalizes the dataset named by the config (IDX pair or CSV).
LabeledDataset load_dataset(const RunConfig& config);

void run_train(const RunConfig& config);
void run_encode(const RunConfig& config);
/// Prints the eval report as JSON on stdout; optional JSON/CSV file outputs.
EvalReport run_eval(const RunConfig& config);
void run_embed(const RunConfig& config);

/// Exit-code mapping: 0 success, 1 compute error, 2 usage or IO error.
int exit_code_for(const std::exception& e);

/// Deterministic double formatting shared by all text outputs.
std::string format_double(double v);

}  // namespace vdsh::cli

#endif  // VDSH_CLI_HPP
