#include "vdsh/retrieval.hpp"

#include <string>

#include "vdsh/errors.hpp"

namespace vdsh {

namespace {

// Packs the columns of a C x N binary label matrix into per-sample bitsets.
std::vector<std::uint64_t> pack_labels(const Matrix& labels, std::size_t words,
                                       bool require_single, const char* which) {
    const std::size_t c = labels.rows();
    const std::size_t n = labels.cols();
    std::vector<std::uint64_t> bits(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t positives = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const double v = labels(j, i);
            if (v == 1.0) {
                bits[i * words + j / 64] |= std::uint64_t{1} << (j % 64);
                ++positives;
            } else if (v != 0.0) {
                throw NumericError(std::string(which) + " labels: entry (" + std::to_string(j) +
                                   "," + std::to_string(i) + ") is not 0 or 1");
            }
        }
        if (positives == 0) {
            throw DimensionError(std::string(which) + " labels: sample " + std::to_string(i) +
                                 " has no positive label");
        }
        if (require_single && positives != 1) {
            throw DimensionError(std::string(which) + " labels: sample " + std::to_string(i) +
                                 " has " + std::to_string(positives) +
                                 " labels in single-label mode");
        }
    }
    return bits;
}

}  // namespace

RelevanceOracle::RelevanceOracle(RelevanceMode mode, const Matrix& query_labels,
                                 const Matrix& db_labels)
    : mode_(mode), num_queries_(query_labels.cols()), num_db_(db_labels.cols()) {
    if (query_labels.rows() != db_labels.rows()) {
        throw DimensionError("relevance oracle: query labels have " +
                             std::to_string(query_labels.rows()) + " classes, database has " +
                             std::to_string(db_labels.rows()));
    }
    const bool single = mode_ == RelevanceMode::kSingleLabel;
    label_words_ = (query_labels.rows() + 63) / 64;
    query_bits_ = pack_labels(query_labels, label_words_, single, "query");
    db_bits_ = pack_labels(db_labels, label_words_, single, "database");

    totals_.resize(num_queries_, 0);
    for (std::size_t q = 0; q < num_queries_; ++q) {
        std::size_t t = 0;
        for (std::size_t d = 0; d < num_db_; ++d) t += relevant(q, d) ? 1 : 0;
        totals_[q] = t;
    }
}

bool RelevanceOracle::relevant(std::size_t query, std::size_t db_item) const {
    const std::uint64_t* qa = query_bits_.data() + query * label_words_;
    const std::uint64_t* da = db_bits_.data() + db_item * label_words_;
    for (std::size_t w = 0; w < label_words_; ++w) {
        if ((qa[w] & da[w]) != 0) return true;
    }
    return false;
}

std::vector<std::size_t> rank_database(CodeView query, const HashCodeMatrix& db) {
    const std::size_t n = db.count();
    std::vector<std::size_t> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = hamming_distance(query, db.view(i));

    // counting sort by distance keeps the ascending-index tie break
    std::vector<std::size_t> counts(db.bits() + 2, 0);
    for (std::size_t d : dist) ++counts[d + 1];
    for (std::size_t k = 1; k < counts.size(); ++k) counts[k] += counts[k - 1];
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[counts[dist[i]]++] = i;
    return order;
}

double average_precision(const std::vector<int>& ranked_relevance, std::size_t total_relevant) {
    if (total_relevant == 0) return 0.0;
    std::size_t seen = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
        if (ranked_relevance[k] != 0) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

PrecisionRecall metrics_within_radius(CodeView query, const HashCodeMatrix& db,
                                      const RelevanceOracle& oracle, std::size_t query_index,
                                      std::size_t radius) {
    if (oracle.num_db() != db.count()) {
        throw DimensionError("metrics_within_radius: oracle covers " +
                             std::to_string(oracle.num_db()) + " items, database has " +
                             std::to_string(db.count()));
    }
    std::size_t retrieved = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < db.count(); ++i) {
        if (hamming_distance(query, db.view(i)) <= radius) {
            ++retrieved;
            if (oracle.relevant(query_index, i)) ++hits;
        }
    }
    PrecisionRecall pr;
    const std::size_t total = oracle.total_relevant(query_index);
    pr.precision = retrieved == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(retrieved);
    pr.recall = total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    return pr;
}

EvalReport evaluate(const HashCodeMatrix& queries, const HashCodeMatrix& db,
                    const RelevanceOracle& oracle) {
    if (queries.bits() != db.bits()) {
        throw DimensionError("evaluate: query codes are " + std::to_string(queries.bits()) +
                             " bits, database codes are " + std::to_string(db.bits()));
    }
    if (oracle.num_queries() != queries.count() || oracle.num_db() != db.count()) {
        throw DimensionError("evaluate: oracle shape does not match code counts");
    }

    EvalReport report;
    report.per_query_ap.reserve(queries.count());
    const std::size_t n = db.count();
    std::vector<std::size_t> dist(n);
    std::vector<std::size_t> counts(db.bits() + 2);
    std::vector<std::size_t> order(n);
    std::vector<int> flags(n);

    for (std::size_t q = 0; q < queries.count(); ++q) {
        const CodeView qv = queries.view(q);
        for (std::size_t i = 0; i < n; ++i) dist[i] = hamming_distance(qv, db.view(i));

        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t d : dist) ++counts[d + 1];
        for (std::size_t k = 1; k < counts.size(); ++k) counts[k] += counts[k - 1];
        for (std::size_t i = 0; i < n; ++i) order[counts[dist[i]]++] = i;

        for (std::size_t k = 0; k < n; ++k) flags[k] = oracle.relevant(q, order[k]) ? 1 : 0;
        report.per_query_ap.push_back(average_precision(flags, oracle.total_relevant(q)));

        for (std::size_t r = 0; r <= 2; ++r) {
            std::size_t retrieved = 0, hits = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (dist[i] <= r) {
                    ++retrieved;
                    if (oracle.relevant(q, i)) ++hits;
                }
            }
            const std::size_t total = oracle.total_relevant(q);
            report.precision_at_radius[r] +=
                retrieved == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(retrieved);
            report.recall_at_radius[r] +=
                total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
        }
    }

    const double nq = static_cast<double>(queries.count());
    if (queries.count() > 0) {
        double ap_sum = 0.0;
        for (double ap : report.per_query_ap) ap_sum += ap;
        report.map = ap_sum / nq;
        for (std::size_t r = 0; r <= 2; ++r) {
            report.precision_at_radius[r] /= nq;
            report.recall_at_radius[r] /= nq;
        }
    }
    return report;
}

}  // namespace vdsh
