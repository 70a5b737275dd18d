#include "vdsh/network.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vdsh/errors.hpp"
#include "vdsh/io_util.hpp"

namespace vdsh {

namespace {
constexpr char kMagic[4] = {'V', 'D', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void NetworkConfig::validate() const {
    if (hidden_dims.empty()) throw DimensionError("network needs at least one hidden layer");
    if (input_dim == 0) throw DimensionError("input dimension must be >= 1");
    if (num_classes == 0) throw DimensionError("number of classes must be >= 1");
    for (std::size_t d : hidden_dims) {
        if (d == 0) throw DimensionError("every layer width must be >= 1");
    }
}

void NetworkWeights::validate() const {
    config.validate();
    if (layers.size() != config.num_layers()) {
        throw DimensionError("weight stack has " + std::to_string(layers.size()) +
                             " layers, config says " + std::to_string(config.num_layers()));
    }
    for (std::size_t m = 1; m <= layers.size(); ++m) {
        const Matrix& th = layer(m);
        if (th.rows() != config.dim(m) || th.cols() != config.dim(m - 1)) {
            throw DimensionError("layer " + std::to_string(m) + " is " +
                                 std::to_string(th.rows()) + "x" + std::to_string(th.cols()) +
                                 ", expected " + std::to_string(config.dim(m)) + "x" +
                                 std::to_string(config.dim(m - 1)));
        }
        if (!th.all_finite()) {
            throw NumericError("layer " + std::to_string(m) + " contains non-finite entries");
        }
    }
}

void relu_layer_into(std::span<const double> z, const Matrix& theta, std::span<double> out) {
    if (z.size() != theta.cols() || out.size() != theta.rows()) {
        throw DimensionError("relu_layer: theta is " + std::to_string(theta.rows()) + "x" +
                             std::to_string(theta.cols()) + ", z has " + std::to_string(z.size()) +
                             " entries");
    }
    const double* row = theta.data();
    for (std::size_t r = 0; r < theta.rows(); ++r, row += theta.cols()) {
        double acc = 0.0;
        for (std::size_t c = 0; c < theta.cols(); ++c) acc += row[c] * z[c];
        out[r] = acc > 0.0 ? acc : 0.0;
    }
}

std::vector<double> relu_layer(std::span<const double> z, const Matrix& theta) {
    std::vector<double> out(theta.rows());
    relu_layer_into(z, theta, out);
    return out;
}

std::vector<std::vector<double>> forward_all(std::span<const double> x,
                                             const NetworkWeights& weights) {
    if (x.size() != weights.config.input_dim) {
        throw DimensionError("forward_all: input has " + std::to_string(x.size()) +
                             " entries, network expects " +
                             std::to_string(weights.config.input_dim));
    }
    std::vector<std::vector<double>> outs;
    outs.reserve(weights.config.num_layers() + 1);
    outs.emplace_back(x.begin(), x.end());
    for (std::size_t m = 1; m <= weights.config.num_layers(); ++m) {
        outs.push_back(relu_layer(outs.back(), weights.layer(m)));
    }
    return outs;
}

std::vector<std::int8_t> encode(std::span<const double> x, const NetworkWeights& weights) {
    if (x.size() != weights.config.input_dim) {
        throw DimensionError("encode: input has " + std::to_string(x.size()) +
                             " entries, network expects " +
                             std::to_string(weights.config.input_dim));
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t m = 1; m <= weights.config.num_layers(); ++m) {
        next.resize(weights.config.dim(m));
        relu_layer_into(cur, weights.layer(m), next);
        cur.swap(next);
    }
    std::vector<std::int8_t> code(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) code[k] = cur[k] > 0.0 ? 1 : -1;
    return code;
}

HashCodeMatrix encode_all(const Matrix& feature_columns, const NetworkWeights& weights) {
    if (feature_columns.rows() != weights.config.input_dim) {
        throw DimensionError("encode_all: features have " +
                             std::to_string(feature_columns.rows()) +
                             " dimensions, network expects " +
                             std::to_string(weights.config.input_dim));
    }
    HashCodeMatrix codes(weights.config.code_bits());
    std::vector<double> x(feature_columns.rows());
    for (std::size_t i = 0; i < feature_columns.cols(); ++i) {
        for (std::size_t r = 0; r < x.size(); ++r) x[r] = feature_columns(r, i);
        const auto code = encode(x, weights);
        codes.append(code);
    }
    return codes;
}

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path,
                  const Matrix* classifier) {
    weights.validate();
    io::AtomicWriter out(path);
    out.write(kMagic, 4);
    out.u32_le(kVersion);
    const std::size_t m_layers = weights.config.num_layers();
    out.u32_le(static_cast<std::uint32_t>(m_layers));
    for (std::size_t m = 0; m <= m_layers; ++m) {
        out.u32_le(static_cast<std::uint32_t>(weights.config.dim(m)));
    }
    for (std::size_t m = 1; m <= m_layers; ++m) {
        for (double v : weights.layer(m).flat()) out.f64_le(v);
    }
    if (classifier != nullptr) {
        if (classifier->rows() != weights.config.code_bits()) {
            throw DimensionError("classifier has " + std::to_string(classifier->rows()) +
                                 " rows, code length is " +
                                 std::to_string(weights.config.code_bits()));
        }
        out.u8(1);
        out.u32_le(static_cast<std::uint32_t>(classifier->cols()));
        for (double v : classifier->flat()) out.f64_le(v);
    } else {
        out.u8(0);
    }
    out.commit();
}

LoadedModel load_weights(const std::filesystem::path& path) {
    io::Reader in(path);
    char magic[4];
    in.read_exact(magic, 4);
    if (magic[0] != kMagic[0] || magic[1] != kMagic[1] || magic[2] != kMagic[2] ||
        magic[3] != kMagic[3]) {
        throw BadMagicError(in.path() + ": not a weight file (bad magic)");
    }
    const std::uint32_t version = in.u32_le();
    if (version != kVersion) {
        throw BadVersionError(in.path() + ": unsupported weight file version " +
                              std::to_string(version));
    }
    const std::uint32_t m_layers = in.u32_le();
    if (m_layers == 0 || m_layers > 100000) {
        throw ShapeError(in.path() + ": implausible layer count " + std::to_string(m_layers));
    }
    std::vector<std::size_t> dims(m_layers + 1);
    for (auto& d : dims) {
        d = in.u32_le();
        if (d == 0) throw ShapeError(in.path() + ": zero dimension in header");
    }

    LoadedModel model;
    model.weights.config.input_dim = dims[0];
    model.weights.config.hidden_dims.assign(dims.begin() + 1, dims.end());
    model.weights.config.num_classes = 1;  // placeholder until classifier block read
    for (std::size_t m = 1; m <= m_layers; ++m) {
        Matrix th(dims[m], dims[m - 1]);
        for (double& v : th.flat()) v = in.f64_le();
        if (!th.all_finite()) {
            throw FormatError(in.path() + ": layer " + std::to_string(m) +
                              " contains non-finite values");
        }
        model.weights.layers.push_back(std::move(th));
    }
    const std::uint8_t has_classifier = in.u8();
    if (has_classifier == 1) {
        const std::uint32_t num_classes = in.u32_le();
        if (num_classes == 0) throw ShapeError(in.path() + ": classifier with zero classes");
        Matrix w(dims[m_layers], num_classes);
        for (double& v : w.flat()) v = in.f64_le();
        if (!w.all_finite()) {
            throw FormatError(in.path() + ": classifier contains non-finite values");
        }
        model.weights.config.num_classes = num_classes;
        model.classifier = std::move(w);
    } else if (has_classifier != 0) {
        throw ShapeError(in.path() + ": invalid classifier flag " +
                         std::to_string(has_classifier));
    }
    if (!in.at_eof()) {
        throw ShapeError(in.path() + ": trailing bytes after payload");
    }
    return model;
}

}  // namespace vdsh
