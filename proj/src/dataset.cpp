#include "vdsh/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "vdsh/errors.hpp"
#include "vdsh/io_util.hpp"

namespace vdsh {

void LabeledDataset::validate() const {
    if (x.cols() != y.cols()) {
        throw DimensionError("dataset: " + std::to_string(x.cols()) + " feature columns vs " +
                             std::to_string(y.cols()) + " label columns");
    }
    if (ids.size() != x.cols()) {
        throw DimensionError("dataset: id count does not match sample count");
    }
    for (std::size_t i = 0; i < y.cols(); ++i) {
        std::size_t positives = 0;
        for (std::size_t c = 0; c < y.rows(); ++c) {
            const double v = y(c, i);
            if (v != 0.0 && v != 1.0) {
                throw NumericError("dataset: label entry (" + std::to_string(c) + "," +
                                   std::to_string(i) + ") is not 0 or 1");
            }
            positives += v == 1.0 ? 1 : 0;
        }
        if (positives == 0) {
            throw DimensionError("dataset: sample " + std::to_string(i) + " has no label");
        }
    }
}

bool LabeledDataset::is_single_label() const {
    for (std::size_t i = 0; i < y.cols(); ++i) {
        std::size_t positives = 0;
        for (std::size_t c = 0; c < y.rows(); ++c) positives += y(c, i) == 1.0 ? 1 : 0;
        if (positives != 1) return false;
    }
    return true;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    out.x = Matrix(x.rows(), indices.size());
    out.y = Matrix(y.rows(), indices.size());
    out.ids.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        for (std::size_t r = 0; r < x.rows(); ++r) out.x(r, k) = x(r, i);
        for (std::size_t r = 0; r < y.rows(); ++r) out.y(r, k) = y(r, i);
        out.ids.push_back(ids[i]);
    }
    return out;
}

IdxData load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    io::Reader images(images_path);
    const std::uint32_t image_magic = images.u32_be();
    if (image_magic != 0x00000803u) {
        throw BadMagicError(images.path() + ": bad IDX image magic 0x" + [&] {
            std::ostringstream os;
            os << std::hex << image_magic;
            return os.str();
        }());
    }
    const std::uint32_t n_images = images.u32_be();
    const std::uint32_t rows = images.u32_be();
    const std::uint32_t cols = images.u32_be();
    if (rows == 0 || cols == 0) throw ShapeError(images.path() + ": zero image dimensions");

    io::Reader labels(labels_path);
    const std::uint32_t label_magic = labels.u32_be();
    if (label_magic != 0x00000801u) {
        throw BadMagicError(labels.path() + ": bad IDX label magic");
    }
    const std::uint32_t n_labels = labels.u32_be();
    if (n_labels != n_images) {
        throw ShapeError("IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                         std::to_string(n_labels) + " labels");
    }

    IdxData out;
    out.image_rows = rows;
    out.image_cols = cols;
    const std::size_t d = static_cast<std::size_t>(rows) * cols;
    out.features = Matrix(d, n_images);
    std::vector<std::uint8_t> pixel_buf(d);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        images.read_exact(pixel_buf.data(), d);
        for (std::size_t r = 0; r < d; ++r) out.features(r, i) = pixel_buf[r];
    }
    if (!images.at_eof()) throw ShapeError(images.path() + ": trailing bytes after images");

    out.labels.resize(n_labels);
    if (n_labels > 0) labels.read_exact(out.labels.data(), n_labels);
    if (!labels.at_eof()) throw ShapeError(labels.path() + ": trailing bytes after labels");
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        if (out.labels[i] > 9) {
            throw ShapeError(labels.path() + ": label " + std::to_string(out.labels[i]) +
                             " out of range at sample " + std::to_string(i));
        }
    }
    return out;
}

namespace {

bool parse_double(std::string_view cell, double& out) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    if (first == last) return false;
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string_view> split_cells(const std::string& line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.emplace_back(line.data() + start, line.size() - start);
            break;
        }
        cells.emplace_back(line.data() + start, pos - start);
        start = pos + 1;
    }
    return cells;
}

}  // namespace

CsvData load_csv(const std::filesystem::path& path, std::size_t label_columns) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");

    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_cells(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], row[c])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (line_no == 1) continue;  // header row
            throw ParseError(path.string() + ": non-numeric cell on line " +
                             std::to_string(line_no));
        }
        if (width == 0) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError(path.string() + ": ragged row on line " + std::to_string(line_no) +
                             " (" + std::to_string(row.size()) + " cells, expected " +
                             std::to_string(width) + ")");
        }
        rows.push_back(std::move(row));
        row_lines.push_back(line_no);
    }
    if (rows.empty()) throw ParseError(path.string() + ": no data rows");
    if (label_columns == 0) throw DimensionError("load_csv: label_columns must be >= 1");
    if (label_columns >= width) {
        throw DimensionError(path.string() + ": " + std::to_string(label_columns) +
                             " label columns leave no feature columns (row width " +
                             std::to_string(width) + ")");
    }

    const std::size_t n = rows.size();
    const std::size_t d = width - label_columns;
    CsvData out;
    out.features = Matrix(d, n);
    out.labels = Matrix(label_columns, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < d; ++r) out.features(r, i) = rows[i][r];
        for (std::size_t c = 0; c < label_columns; ++c) {
            const double v = rows[i][d + c];
            if (v != 0.0 && v != 1.0) {
                throw ParseError(path.string() + ": label value " + std::to_string(v) +
                                 " on line " + std::to_string(row_lines[i]) + " is not 0 or 1");
            }
            out.labels(c, i) = v;
        }
    }
    return out;
}

Matrix load_label_csv(const std::filesystem::path& path) {
    // Reuse the CSV reader by treating every column as a label: parse raw,
    // then validate 0/1.
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_cells(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], row[c])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (line_no == 1) continue;
            throw ParseError(path.string() + ": non-numeric cell on line " +
                             std::to_string(line_no));
        }
        if (width == 0) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError(path.string() + ": ragged row on line " + std::to_string(line_no));
        }
        for (double v : row) {
            if (v != 0.0 && v != 1.0) {
                throw ParseError(path.string() + ": label value on line " +
                                 std::to_string(line_no) + " is not 0 or 1");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string() + ": no data rows");
    Matrix labels(width, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < width; ++c) labels(c, i) = rows[i][c];
    }
    return labels;
}

void normalize_unit(Matrix& x) {
    for (std::size_t i = 0; i < x.cols(); ++i) {
        double sq = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) sq += x(r, i) * x(r, i);
        if (sq == 0.0) {
            throw NumericError("normalize_unit: sample " + std::to_string(i) +
                               " is all zeros and cannot be normalized");
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t r = 0; r < x.rows(); ++r) x(r, i) *= inv;
    }
}

Matrix one_hot(std::span<const std::uint8_t> labels, std::size_t num_classes) {
    Matrix y(num_classes, labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw DimensionError("one_hot: label " + std::to_string(labels[i]) +
                                 " out of range for " + std::to_string(num_classes) + " classes");
        }
        y(labels[i], i) = 1.0;
    }
    return y;
}

LabeledDataset dataset_from_idx(const IdxData& idx, std::size_t num_classes) {
    LabeledDataset ds;
    ds.x = idx.features;
    for (double& v : ds.x.flat()) v /= 255.0;  // shared numeric range with the CSV path
    normalize_unit(ds.x);
    ds.y = one_hot(idx.labels, num_classes);
    ds.ids.resize(idx.labels.size());
    for (std::size_t i = 0; i < ds.ids.size(); ++i) ds.ids[i] = i;
    ds.validate();
    return ds;
}

LabeledDataset dataset_from_csv(CsvData csv) {
    LabeledDataset ds;
    ds.x = std::move(csv.features);
    normalize_unit(ds.x);
    ds.y = std::move(csv.labels);
    ds.ids.resize(ds.x.cols());
    for (std::size_t i = 0; i < ds.ids.size(); ++i) ds.ids[i] = i;
    ds.validate();
    return ds;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> split_query_database(const LabeledDataset& dataset,
                                                               const SplitSpec& spec) {
    dataset.validate();
    if (spec.queries_per_class == 0) {
        throw DimensionError("split: queries_per_class must be >= 1");
    }
    Rng rng(spec.seed);
    std::vector<bool> picked(dataset.count(), false);

    // Per-label draws in ascending label order; single-label data reduces to
    // the per-class protocol because classes do not overlap.
    for (std::size_t c = 0; c < dataset.num_classes(); ++c) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < dataset.count(); ++i) {
            if (!picked[i] && dataset.y(c, i) == 1.0) candidates.push_back(i);
        }
        if (candidates.size() <= spec.queries_per_class) {
            throw DimensionError("split: label " + std::to_string(c) + " has only " +
                                 std::to_string(candidates.size()) +
                                 " available samples, need more than " +
                                 std::to_string(spec.queries_per_class));
        }
        shuffle_indices(candidates, rng);
        for (std::size_t k = 0; k < spec.queries_per_class; ++k) picked[candidates[k]] = true;
    }

    std::vector<std::size_t> query_idx;
    std::vector<std::size_t> db_idx;
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        (picked[i] ? query_idx : db_idx).push_back(i);
    }
    return {dataset.subset(query_idx), dataset.subset(db_idx)};
}

}  // namespace vdsh
