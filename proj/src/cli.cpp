#include "vdsh/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "vdsh/codes.hpp"
#include "vdsh/io_util.hpp"
#include "vdsh/network.hpp"

namespace vdsh::cli {

namespace {

using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& text) {
    io::AtomicWriter out(path);
    out.write(text.data(), text.size());
    out.commit();
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void apply_json_config(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("config file " + path + ": expected a JSON object");

    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "data_images") config.data_images = value.get<std::string>();
            else if (key == "data_labels") config.data_labels = value.get<std::string>();
            else if (key == "data_csv") config.data_csv = value.get<std::string>();
            else if (key == "label_columns") config.label_columns = value.get<std::size_t>();
            else if (key == "dims") config.dims = value.get<std::vector<std::size_t>>();
            else if (key == "alpha_theta") config.hyper.alpha_theta = value.get<double>();
            else if (key == "alpha_w") config.hyper.alpha_w = value.get<double>();
            else if (key == "beta") config.hyper.beta = value.get<double>();
            else if (key == "gamma") config.hyper.gamma = value.get<double>();
            else if (key == "subgrad_steps") config.hyper.subgrad_steps = value.get<std::size_t>();
            else if (key == "subgrad_base_step") config.hyper.subgrad_base_step = value.get<double>();
            else if (key == "max_iterations") config.hyper.max_iterations = value.get<std::size_t>();
            else if (key == "convergence_window") config.hyper.convergence_window = value.get<std::size_t>();
            else if (key == "convergence_rel_tol") config.hyper.convergence_rel_tol = value.get<double>();
            else if (key == "init_scale") config.hyper.init_scale = value.get<double>();
            else if (key == "force_subgradient") config.hyper.force_subgradient = value.get<bool>();
            else if (key == "parallel_reduce") config.hyper.parallel_reduce = value.get<bool>();
            else if (key == "threads") config.hyper.threads = value.get<std::size_t>();
            else if (key == "seed") config.seed = value.get<std::uint64_t>();
            else if (key == "out_weights") config.out_weights = value.get<std::string>();
            else if (key == "out_diagnostics") config.out_diagnostics = value.get<std::string>();
            else if (key == "timing") config.timing = value.get<bool>();
            else if (key == "weights_path") config.weights_path = value.get<std::string>();
            else if (key == "out_codes") config.out_codes = value.get<std::string>();
            else if (key == "query_codes") config.query_codes = value.get<std::string>();
            else if (key == "db_codes") config.db_codes = value.get<std::string>();
            else if (key == "query_labels") config.query_labels = value.get<std::string>();
            else if (key == "db_labels") config.db_labels = value.get<std::string>();
            else if (key == "mode") config.mode = value.get<std::string>();
            else if (key == "out_json") config.out_json = value.get<std::string>();
            else if (key == "out_csv") config.out_csv = value.get<std::string>();
            else if (key == "layer") config.layer = value.get<std::size_t>();
            else if (key == "out_embed") config.out_embed = value.get<std::string>();
            else throw UsageError("config file " + path + ": unknown key \"" + key + "\"");
        } catch (const json::exception& e) {
            throw ParseError("config file " + path + ": key \"" + key + "\": " + e.what());
        }
    }
}

LabeledDataset load_dataset(const RunConfig& config) {
    const bool has_idx = !config.data_images.empty() || !config.data_labels.empty();
    const bool has_csv = !config.data_csv.empty();
    if (has_idx && has_csv) {
        throw UsageError("give either an IDX pair or a CSV, not both");
    }
    if (has_csv) {
        return dataset_from_csv(load_csv(config.data_csv, config.label_columns));
    }
    if (config.data_images.empty() || config.data_labels.empty()) {
        throw UsageError("dataset required: --data-images with --data-labels, or --data-csv");
    }
    return dataset_from_idx(load_idx(config.data_images, config.data_labels));
}

void run_train(const RunConfig& config) {
    if (config.out_weights.empty()) throw UsageError("--out-weights is required for train");
    if (config.dims.empty()) throw UsageError("--dims is required for train");
    config.hyper.validate();

    const LabeledDataset dataset = load_dataset(config);
    NetworkConfig net;
    net.input_dim = dataset.dim();
    net.hidden_dims = config.dims;
    net.num_classes = dataset.num_classes();
    net.validate();

    std::ostringstream diag;
    diag << "iter,layer,mean_beta_u_norm,mean_gamma_v_norm,objective_eq4,aug_lagrangian,wall_ms\n";
    const DiagnosticsSink sink = [&](const DiagnosticsRow& row) {
        for (std::size_t m = 0; m < row.mean_u_norm.size(); ++m) {
            diag << row.iteration << ',' << (m + 1) << ',' << format_double(row.mean_u_norm[m])
                 << ',' << format_double(row.mean_v_norm[m]) << ",,,\n";
        }
        diag << row.iteration << ",-1,,," << format_double(row.objective_eq4) << ','
             << format_double(row.aug_lagrangian) << ','
             << format_double(config.timing ? row.wall_time_ms : 0.0) << '\n';
    };

    Rng rng(config.seed);
    TrainResult result = train(dataset, net, config.hyper, rng, sink);

    save_weights(result.weights, config.out_weights, &result.classifier);
    if (!config.out_diagnostics.empty()) {
        write_text_atomic(config.out_diagnostics, diag.str());
    }
}

void run_encode(const RunConfig& config) {
    if (config.weights_path.empty()) throw UsageError("--weights is required for encode");
    if (config.out_codes.empty()) throw UsageError("--out is required for encode");
    const LoadedModel model = load_weights(config.weights_path);
    const LabeledDataset dataset = load_dataset(config);
    const HashCodeMatrix codes = encode_all(dataset.x, model.weights);
    save_codes(codes, config.out_codes);
}

EvalReport run_eval(const RunConfig& config) {
    if (config.query_codes.empty() || config.db_codes.empty() || config.query_labels.empty() ||
        config.db_labels.empty()) {
        throw UsageError("eval needs --query-codes, --db-codes, --query-labels, --db-labels");
    }
    RelevanceMode mode;
    if (config.mode == "single") {
        mode = RelevanceMode::kSingleLabel;
    } else if (config.mode == "multi") {
        mode = RelevanceMode::kMultiLabel;
    } else {
        throw UsageError("--mode must be \"single\" or \"multi\"");
    }

    const HashCodeMatrix queries = load_codes(config.query_codes);
    const HashCodeMatrix db = load_codes(config.db_codes);
    const Matrix qlabels = load_label_csv(config.query_labels);
    const Matrix dlabels = load_label_csv(config.db_labels);
    if (qlabels.cols() != queries.count()) {
        throw DimensionError("query labels cover " + std::to_string(qlabels.cols()) +
                             " samples, query codes hold " + std::to_string(queries.count()));
    }
    if (dlabels.cols() != db.count()) {
        throw DimensionError("database labels cover " + std::to_string(dlabels.cols()) +
                             " samples, database codes hold " + std::to_string(db.count()));
    }

    const RelevanceOracle oracle(mode, qlabels, dlabels);
    const EvalReport report = evaluate(queries, db, oracle);

    json j;
    j["map"] = report.map;
    for (std::size_t r = 0; r <= 2; ++r) {
        j["precision_r" + std::to_string(r)] = report.precision_at_radius[r];
        j["recall_r" + std::to_string(r)] = report.recall_at_radius[r];
    }
    j["num_queries"] = queries.count();
    j["num_database"] = db.count();
    std::cout << j.dump(2) << std::endl;

    if (!config.out_json.empty()) write_text_atomic(config.out_json, j.dump(2) + "\n");
    if (!config.out_csv.empty()) {
        std::ostringstream csv;
        csv << "map,precision_r0,precision_r1,precision_r2,recall_r0,recall_r1,recall_r2\n";
        csv << format_double(report.map);
        for (std::size_t r = 0; r <= 2; ++r) csv << ',' << format_double(report.precision_at_radius[r]);
        for (std::size_t r = 0; r <= 2; ++r) csv << ',' << format_double(report.recall_at_radius[r]);
        csv << '\n';
        write_text_atomic(config.out_csv, csv.str());
    }
    return report;
}

void run_embed(const RunConfig& config) {
    if (config.weights_path.empty()) throw UsageError("--weights is required for embed");
    if (config.out_embed.empty()) throw UsageError("--out is required for embed");
    const LoadedModel model = load_weights(config.weights_path);
    const std::size_t m_layers = model.weights.config.num_layers();
    if (config.layer > m_layers) {
        throw DimensionError("layer " + std::to_string(config.layer) + " out of range [0, " +
                             std::to_string(m_layers) + "]");
    }
    const LabeledDataset dataset = load_dataset(config);
    if (dataset.dim() != model.weights.config.input_dim) {
        throw DimensionError("data dimension " + std::to_string(dataset.dim()) +
                             " does not match network input " +
                             std::to_string(model.weights.config.input_dim));
    }

    std::ostringstream csv;
    std::vector<double> x(dataset.dim());
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        for (std::size_t r = 0; r < dataset.dim(); ++r) x[r] = dataset.x(r, i);
        const auto outputs = forward_all(x, model.weights);
        const auto& f = outputs[config.layer];
        for (std::size_t c = 0; c < f.size(); ++c) {
            if (c != 0) csv << ',';
            csv << format_double(f[c]);
        }
        csv << '\n';
    }
    write_text_atomic(config.out_embed, csv.str());
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return 2;        // covers FormatError family
    if (dynamic_cast<const DimensionError*>(&e) != nullptr) return 2;
    return 1;  // NumericError and anything unexpected: compute failure
}

}  // namespace vdsh::cli
