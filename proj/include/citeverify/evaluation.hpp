#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "citeverify/corpus.hpp"
#include "citeverify/errors.hpp"
#include "citeverify/sparse.hpp"

namespace citeverify {

struct RankedResult {
    std::string instance_id;
    std::string gold_url;
    std::vector<std::string> ranked_urls;  // one entry per document
};

/// Document order induced by a passage ranking: a document takes the rank
/// of its best passage.
std::vector<std::string> rank_documents(std::span<const ScoredPassage> passages,
                                        const PassageStore& store);

/// Throws EmptyInput for an empty result list.
double precision_at_1(std::span<const RankedResult> results);
/// Throws EmptyInput for an empty result list, std::invalid_argument for k = 0.
double success_rate_at_k(std::span<const RankedResult> results, std::size_t k);

/// Non-empty path segments; query and fragment excluded. Throws MalformedUrl.
std::size_t url_depth(std::string_view url);

struct ScoredCitation {
    std::string citation_id;
    double score = 0.0;
    bool is_failed = false;
};

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
    bool operator==(const PRPoint&) const = default;
};

/// Failed citations are the positives; citations are swept in ascending
/// score order (ties by id), one point per prefix. Throws DegenerateInput
/// unless both classes are present.
std::vector<PRPoint> pr_curve_failed(std::span<const ScoredCitation> scored);

/// Precision at the first sweep point reaching `recall`; nullopt if none does.
std::optional<double> precision_at_recall(std::span<const PRPoint> curve, double recall);

/// counts[i][j]: raters putting item i in category j. Every row must sum to
/// the same n >= 2 (std::invalid_argument otherwise). Throws
/// DegenerateAgreement when expected agreement is 1.
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts);

/// Strict plurality winner; nullopt on a tie for first. Throws EmptyInput
/// for no labels.
template <class Label>
std::optional<Label> majority_vote(std::span<const Label> labels) {
    if (labels.empty()) throw EmptyInput("majority vote over no labels");
    std::map<Label, std::size_t> tally;
    for (const auto& l : labels) ++tally[l];
    std::optional<Label> best;
    std::size_t best_count = 0;
    bool tied = false;
    for (const auto& [label, count] : tally) {
        if (count > best_count) {
            best = label;
            best_count = count;
            tied = false;
        } else if (count == best_count) {
            tied = true;
        }
    }
    if (tied) return std::nullopt;
    return best;
}

struct SignTestResult {
    std::size_t n = 0;
    std::size_t k = 0;
    double one_tail = 1.0;
    double two_tail = 1.0;
};

/// Exact binomial tails with p = 1/2: one_tail = P(X >= max(a, b)),
/// two_tail = min(1, 2 * one_tail). Throws NoInformative when a + b = 0.
SignTestResult sign_test(std::size_t wins_a, std::size_t wins_b);

struct ScoredItem {
    std::string id;
    double score = 0.0;
};

struct ScoreBucket {
    std::optional<double> lower;  // inclusive; none for the lowest bucket
    std::optional<double> upper;  // exclusive; none for the highest bucket
    std::vector<std::string> ids;
};

/// edges.size() + 1 half-open buckets. Throws std::invalid_argument unless
/// edges are strictly increasing.
std::vector<ScoreBucket> bucket_by_score(std::span<const ScoredItem> items,
                                         std::span<const double> edges);

/// Named scalar metrics plus PR curves.
struct MetricReport {
    std::map<std::string, double> metrics;
    std::map<std::string, std::vector<PRPoint>> curves;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
    /// Columns: curve,recall,precision.
    void write_csv(std::ostream& out) const;

    bool operator==(const MetricReport&) const = default;
};

}  // namespace citeverify
