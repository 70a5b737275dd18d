#ifndef VDSH_DATASET_HPP
#define VDSH_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "vdsh/matrix.hpp"

namespace vdsh {

/// Feature columns X (d x N, unit-normalized) with binary label matrix
/// Y (C x N, possibly multi-hot) and the original sample identifiers.
struct LabeledDataset {
    Matrix x;                       // d x N
    Matrix y;                       // C x N, entries in {0,1}
    std::vector<std::uint64_t> ids; // one per column

    std::size_t dim() const { return x.rows(); }
    std::size_t count() const { return x.cols(); }
    std::size_t num_classes() const { return y.rows(); }

    /// Shape consistency, 0/1 labels, >=1 label per sample.
    void validate() const;

    /// True when every sample carries exactly one label.
    bool is_single_label() const;

    LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

struct SplitSpec {
    std::size_t queries_per_class = 1;
    std::uint64_t seed = 0;
};

/// Raw MNIST-style IDX pair: pixel intensities in [0, 255] flattened
/// row-major, one integer label per image.
struct IdxData {
    std::size_t image_rows = 0;
    std::size_t image_cols = 0;
    Matrix features;                  // d x N, d = rows*cols
    std::vector<std::uint8_t> labels; // values in [0, 9]
};

/// Parses the big-endian IDX pair (image magic 0x00000803, label magic
/// 0x00000801). Errors: BadMagicError, TruncatedFileError, ShapeError
/// (including an image/label count mismatch).
IdxData load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Rectangular numeric CSV whose last label_columns columns are binary
/// labels. A non-numeric first line is treated as a header. Errors name the
/// offending line.
struct CsvData {
    Matrix features;  // d x N
    Matrix labels;    // C x N with C = label_columns
};
CsvData load_csv(const std::filesystem::path& path, std::size_t label_columns);

/// CSV of binary labels only: N rows x C columns.
Matrix load_label_csv(const std::filesystem::path& path);

/// Scales every column to unit l2 norm, in place. An all-zero column is an
/// error naming the sample.
void normalize_unit(Matrix& x);

/// C x N one-hot matrix from integer class labels.
Matrix one_hot(std::span<const std::uint8_t> labels, std::size_t num_classes);

/// IDX pixels / 255, unit normalization, one-hot labels.
LabeledDataset dataset_from_idx(const IdxData& idx, std::size_t num_classes = 10);

/// CSV features as-is, unit normalization, labels passed through.
LabeledDataset dataset_from_csv(CsvData csv);

/// Disjoint (queries, database) partition covering every sample.
/// Single-label data samples queries_per_class queries from each class;
/// multi-label data samples per label in ascending label order, excluding
/// already-picked samples. Deterministic per spec.seed.
std::pair<LabeledDataset, LabeledDataset> split_query_database(const LabeledDataset& dataset,
                                                               const SplitSpec& spec);

}  // namespace vdsh

#endif  // VDSH_DATASET_HPP
