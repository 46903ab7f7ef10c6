#pragma once

// Claim-passage verification scorer.
//
// A passage is described by a fixed set of lexical comparison features
// against the claim and scored by a linear model. A document scores the
// maximum over its passages. Training follows a latent-passage EM scheme:
// only claim/document pairs are labelled, so the supporting passage of the
// gold document is re-estimated (hard argmax) before every update, and the
// update is a softmax cross-entropy step that ranks it above retrieved
// passages from other documents.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "citeverify/corpus.hpp"
#include "citeverify/fusion.hpp"
#include "citeverify/sparse.hpp"

namespace citeverify {

enum class Feature : std::size_t {
    JaccardUnigram,
    ClaimCoverage,
    TfidfCosine,
    MaxNgramMatch,
    BigramOverlap,
    TitleOverlap,
    LogLenRatio,
    Bias,
};

inline constexpr std::size_t kFeatureCount = 8;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "jaccard_unigram", "claim_coverage", "tfidf_cosine", "max_ngram_match",
    "bigram_overlap",  "title_overlap",  "log_len_ratio", "bias",
};

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
    double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
    bool operator==(const FeatureVector&) const = default;
};

using IdfLookup = std::function<double(std::string_view)>;

/// Precomputes the claim side of the features so one claim can be compared
/// against many passages.
class ClaimFeaturizer {
public:
    /// `idf` weights the tf-idf cosine; uniform when empty.
    explicit ClaimFeaturizer(const ClaimContext& ctx, IdfLookup idf = {});

    FeatureVector featurize(std::string_view passage_text) const;

private:
    double idf(const std::string& term) const;

    IdfLookup idf_;
    std::vector<std::string> claim_tokens_;
    std::unordered_set<std::string> claim_set_;
    std::unordered_set<std::string> claim_bigrams_;
    std::unordered_set<std::string> title_set_;
    std::vector<std::pair<std::string, double>> claim_weights_;  // tf * idf per distinct term
    double claim_norm_ = 0.0;
};

/// All features lie in [0, 1] except log_len_ratio (0 for an empty passage)
/// and the constant bias.
FeatureVector extract_features(const ClaimContext& ctx, std::string_view passage_text,
                               const IdfLookup& idf = {});

/// Linear weights over FeatureVector.
class CrossScorer {
public:
    CrossScorer() : weights_(kFeatureCount, 0.0) {}
    /// Throws ArityMismatch unless weights.size() == kFeatureCount, and
    /// std::invalid_argument for non-finite weights.
    explicit CrossScorer(std::vector<double> weights);

    /// Untrained starting point: unit weight on the overlap features.
    static CrossScorer initial();

    std::span<const double> weights() const { return weights_; }
    std::span<double> weights() { return weights_; }

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    /// Throws ParseError on a version or feature-name mismatch.
    static CrossScorer load(std::istream& in, const std::string& source_name);
    static CrossScorer load(const std::filesystem::path& path);

    bool operator==(const CrossScorer&) const = default;

private:
    std::vector<double> weights_;
};

double score_passage(const CrossScorer& scorer, const FeatureVector& features);
/// Throws ArityMismatch when the lengths differ.
double score_passage(const CrossScorer& scorer, std::span<const double> features);

struct PassageRef {
    PassageId id = 0;
    std::string_view text;
};

struct VerificationResult {
    std::string doc_url;
    PassageId best_passage_id = 0;
    std::size_t best_passage_index = 0;  // position in the scored list
    double score = 0.0;
    bool flagged = false;  // score < threshold

    bool operator==(const VerificationResult&) const = default;
};

inline constexpr double kDefaultFlagThreshold = 0.0;
inline constexpr std::size_t kDefaultPrefixBudgetWords = 300;

/// Max over per-passage scores, ties to the lowest position. Throws
/// EmptyDocument for an empty passage list.
VerificationResult score_document(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                  std::string doc_url, std::span<const PassageRef> passages,
                                  double threshold = kDefaultFlagThreshold);
VerificationResult score_document(const CrossScorer& scorer, const ClaimContext& ctx,
                                  std::string doc_url, std::span<const PassageRef> passages,
                                  double threshold = kDefaultFlagThreshold);

/// Scores one window holding the first `budget_words` words of the document.
double score_document_prefix(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                             const Document& doc, std::size_t budget_words);
double score_document_prefix(const CrossScorer& scorer, const ClaimContext& ctx,
                             const Document& doc,
                             std::size_t budget_words = kDefaultPrefixBudgetWords);

/// Scores a whole document by chunking it; an empty document scores as one
/// empty passage (bias only).
VerificationResult score_whole_document(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                        const Document& doc, std::size_t window_words,
                                        std::size_t stride_words,
                                        double threshold = kDefaultFlagThreshold);

struct RankedDocument {
    VerificationResult result;
    bool is_original = false;
};

struct RerankOutcome {
    std::vector<RankedDocument> ranked;  // descending score
    std::size_t original_rank = 0;       // 0-based position of the original citation
    std::optional<VerificationResult> recommendation;
};

/// The decision rule: documents sorted by descending score (the original
/// first on ties, then by url); when the original is not first, the top
/// document is recommended.
RerankOutcome decide(VerificationResult original, std::vector<VerificationResult> candidates);

/// Groups candidate passages by document and scores each group with
/// score_document; descending score, url order on ties. Candidates whose
/// url equals `exclude_url` are dropped.
std::vector<VerificationResult> score_candidates(const CrossScorer& scorer,
                                                 const ClaimFeaturizer& claim,
                                                 std::span<const Candidate> candidates,
                                                 const PassageStore& store,
                                                 double threshold = kDefaultFlagThreshold,
                                                 std::string_view exclude_url = {});

/// Groups candidate passages by document, scores each group with
/// score_document, scores every passage of the original citation, and
/// applies decide(). Candidates from the original's url count toward the
/// original, not as a separate document.
RerankOutcome rerank(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                     std::span<const Candidate> candidates, const Document& original,
                     const PassageStore& store, double threshold = kDefaultFlagThreshold);

/// Ranked passages for a claim; typically fused sparse + dense retrieval.
using CandidateRetriever = std::function<std::vector<ScoredPassage>(const ClaimContext&)>;

/// The first n retrieved passages whose document is not the cited one.
std::vector<PassageId> mine_negatives(const CandidateRetriever& retrieve,
                                      const WaferInstance& inst, std::size_t n,
                                      const PassageStore& store);

struct ListwiseLoss {
    double loss = 0.0;
    std::array<double, kFeatureCount> gradient{};
};

/// -log softmax(scores)[0] over {positive} + negatives, with its gradient in
/// the weights.
ListwiseLoss listwise_loss(const CrossScorer& scorer, const FeatureVector& positive,
                           std::span<const FeatureVector> negatives);

struct EmTraining {
    std::size_t epochs = 5;
    double learning_rate = 0.1;
    std::size_t negatives = 8;
};

struct EmReport {
    CrossScorer scorer;
    std::size_t skipped_instances = 0;
    std::vector<std::string> skipped_ids;
    std::vector<double> epoch_losses;  // mean listwise loss per epoch
};

/// Latent-passage EM. Per epoch and instance: the E-step picks the
/// best-scoring gold passage under the current weights, the M-step takes one
/// gradient step of listwise_loss against the mined negatives. Instances with
/// no gold passages, no claim, or only zero-overlap gold passages are
/// skipped and reported.
EmReport train_em(CrossScorer scorer, std::span<const WaferInstance> instances,
                  const CandidateRetriever& retrieve, const PassageStore& store,
                  const EmTraining& options, const IdfLookup& idf = {});

/// The listwise loss is invariant to the bias weight, so training never moves
/// it. Sets the bias so that the `quantile` of `reference_scores` (computed
/// with the current weights) lands on `threshold`. Throws EmptyInput when
/// `reference_scores` is empty and std::invalid_argument unless
/// 0 <= quantile <= 1.
CrossScorer calibrate_bias(CrossScorer scorer, std::span<const double> reference_scores,
                           double quantile, double threshold = kDefaultFlagThreshold);

/// Best passage over half-overlapping windows (stride = window / 2), so that
/// evidence straddling a window boundary is still seen whole. Throws
/// EmptyDocument for a document without words.
Passage select_annotation_passage(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                  const Document& doc,
                                  std::size_t window_words = kDefaultWindowWords);

}  // namespace citeverify
