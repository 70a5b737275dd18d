#ifndef VDSH_RETRIEVAL_HPP
#define VDSH_RETRIEVAL_HPP

#include <cstdint>
#include <vector>

#include "vdsh/codes.hpp"
#include "vdsh/matrix.hpp"

namespace vdsh {

enum class RelevanceMode { kSingleLabel, kMultiLabel };

/// Decides whether a (query, database) pair is a true match from binary
/// label matrices (C x N). Single-label mode requires exactly one positive
/// per column and matches on equal class; multi-label counts a pair as
/// relevant when the samples share at least one label.
class RelevanceOracle {
public:
    RelevanceOracle(RelevanceMode mode, const Matrix& query_labels, const Matrix& db_labels);

    RelevanceMode mode() const { return mode_; }
    std::size_t num_queries() const { return num_queries_; }
    std::size_t num_db() const { return num_db_; }

    bool relevant(std::size_t query, std::size_t db_item) const;
    /// Total number of relevant database items for one query.
    std::size_t total_relevant(std::size_t query) const { return totals_[query]; }

private:
    RelevanceMode mode_;
    std::size_t num_queries_ = 0;
    std::size_t num_db_ = 0;
    std::size_t label_words_ = 0;
    // per-sample label bitsets; single-label mode also keeps the class index
    std::vector<std::uint64_t> query_bits_;
    std::vector<std::uint64_t> db_bits_;
    std::vector<std::size_t> totals_;
};

/// Per-query and aggregate retrieval metrics. Radius-indexed vectors cover
/// Hamming radii 0, 1, 2.
struct EvalReport {
    double map = 0.0;
    double precision_at_radius[3] = {0.0, 0.0, 0.0};
    double recall_at_radius[3] = {0.0, 0.0, 0.0};
    std::vector<double> per_query_ap;
};

/// Database indices sorted by ascending Hamming distance from the query,
/// ties broken by ascending index.
std::vector<std::size_t> rank_database(CodeView query, const HashCodeMatrix& db);

/// AP = (1/total_relevant) * sum over relevant ranks k of
/// (relevant items in the first k) / k. Zero when total_relevant is zero.
/// flags must cover the full ranked database.
double average_precision(const std::vector<int>& ranked_relevance, std::size_t total_relevant);

/// Precision and recall of the set of database items within the given
/// Hamming radius. Empty retrieved set gives precision 0; zero relevant
/// items give recall 0.
struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};
PrecisionRecall metrics_within_radius(CodeView query, const HashCodeMatrix& db,
                                      const RelevanceOracle& oracle, std::size_t query_index,
                                      std::size_t radius);

/// Full protocol: MAP over all queries plus mean precision/recall at
/// Hamming radii 0, 1, 2.
EvalReport evaluate(const HashCodeMatrix& queries, const HashCodeMatrix& db,
                    const RelevanceOracle& oracle);

}  // namespace vdsh

#endif  // VDSH_RETRIEVAL_HPP
