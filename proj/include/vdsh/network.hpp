#ifndef VDSH_NETWORK_HPP
#define VDSH_NETWORK_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vdsh/codes.hpp"
#include "vdsh/matrix.hpp"

namespace vdsh {

/// Architecture of the deep ReLU hashing network: input dimension d,
/// hidden widths D_1..D_M (the last width is the code length K), and the
/// number of classes C driving the classifier shape.
struct NetworkConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;  // D_1 .. D_M, D_M = K
    std::size_t num_classes = 0;

    std::size_t num_layers() const { return hidden_dims.size(); }
    std::size_t code_bits() const { return hidden_dims.back(); }
    /// D_m for m in [0, M], with D_0 = input_dim.
    std::size_t dim(std::size_t m) const { return m == 0 ? input_dim : hidden_dims[m - 1]; }

    /// Throws DimensionError unless M >= 1 and every dimension >= 1.
    void validate() const;
};

/// The weight stack: layer m (1-based) maps D_{m-1} -> D_m, stored as a
/// D_m x D_{m-1} matrix. No bias terms.
struct NetworkWeights {
    NetworkConfig config;
    std::vector<Matrix> layers;  // layers[m-1] is D_m x D_{m-1}

    const Matrix& layer(std::size_t m) const { return layers[m - 1]; }
    Matrix& layer(std::size_t m) { return layers[m - 1]; }

    /// Shape consistency with config plus finiteness of every entry.
    void validate() const;
};

/// out = max(0, theta * z), entry-wise.
std::vector<double> relu_layer(std::span<const double> z, const Matrix& theta);

/// Allocation-free form; out must have theta.rows() entries.
void relu_layer_into(std::span<const double> z, const Matrix& theta, std::span<double> out);

/// All layer outputs [F_0(x) .. F_M(x)] with F_0 = x.
std::vector<std::vector<double>> forward_all(std::span<const double> x,
                                             const NetworkWeights& weights);

/// Hash code of x: bit k is +1 iff F_M(x)_k > 0, else -1 (sign(0) = -1).
/// Because F_M is a ReLU output this equals the sign of the final
/// pre-activation.
std::vector<std::int8_t> encode(std::span<const double> x, const NetworkWeights& weights);

/// Encode every column of a d x N feature matrix into a packed code matrix.
HashCodeMatrix encode_all(const Matrix& feature_columns, const NetworkWeights& weights);

/// Weight file persistence. Binary little-endian layout:
///   magic "VDSH" | version u32=1 | M u32 | dims u32 x (M+1): d, D_1..D_M |
///   M weight matrices f64 row-major in layer order |
///   classifier flag u8 | if 1: C u32 then K x C f64 row-major.
/// Round-trips are bit exact.
void save_weights(const NetworkWeights& weights, const std::filesystem::path& path,
                  const Matrix* classifier = nullptr);

struct LoadedModel {
    NetworkWeights weights;
    std::optional<Matrix> classifier;  // K x C when the file carries one
};

/// Errors: BadMagicError, BadVersionError, TruncatedFileError, ShapeError.
LoadedModel load_weights(const std::filesystem::path& path);

}  // namespace vdsh

#endif  // VDSH_NETWORK_HPP
