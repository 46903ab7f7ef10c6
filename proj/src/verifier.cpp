#include "citeverify/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

namespace {

constexpr std::string_view kScorerHeader = "citeverify-scorer";
constexpr int kScorerVersion = 1;

std::string bigram_key(const std::string& a, const std::string& b) { return a + ' ' + b; }

// Longest common run of consecutive tokens.
std::size_t longest_common_run(const std::vector<std::string>& a,
                               const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
            best = std::max(best, cur[j]);
        }
        std::swap(prev, cur);
    }
    return best;
}

}  // namespace

ClaimFeaturizer::ClaimFeaturizer(const ClaimContext& ctx, IdfLookup idf)
    : idf_(std::move(idf)), claim_tokens_(tokenize(ctx.claim_sentence)) {
    claim_set_.insert(claim_tokens_.begin(), claim_tokens_.end());
    for (std::size_t i = 0; i + 1 < claim_tokens_.size(); ++i) {
        claim_bigrams_.insert(bigram_key(claim_tokens_[i], claim_tokens_[i + 1]));
    }
    for (auto& t : tokenize(ctx.article_title)) title_set_.insert(std::move(t));

    std::map<std::string, double> tf;
    for (const auto& t : claim_tokens_) tf[t] += 1.0;
    for (const auto& [term, count] : tf) {
        const double w = count * this->idf(term);
        claim_weights_.emplace_back(term, w);
        claim_norm_ += w * w;
    }
    claim_norm_ = std::sqrt(claim_norm_);
}

double ClaimFeaturizer::idf(const std::string& term) const { return idf_ ? idf_(term) : 1.0; }

FeatureVector ClaimFeaturizer::featurize(std::string_view passage_text) const {
    FeatureVector f;
    f[Feature::Bias] = 1.0;
    const auto passage = tokenize(passage_text);
    if (passage.empty()) return f;

    std::unordered_map<std::string, double> passage_tf;
    for (const auto& t : passage) passage_tf[t] += 1.0;

    std::size_t shared = 0;
    for (const auto& t : claim_set_) shared += passage_tf.contains(t) ? 1 : 0;
    const std::size_t union_size = claim_set_.size() + passage_tf.size() - shared;

    if (union_size > 0) f[Feature::JaccardUnigram] = static_cast<double>(shared) / union_size;
    if (!claim_set_.empty()) {
        f[Feature::ClaimCoverage] = static_cast<double>(shared) / claim_set_.size();
    }

    if (claim_norm_ > 0.0) {
        double dot = 0.0;
        for (const auto& [term, w] : claim_weights_) {
            if (const auto it = passage_tf.find(term); it != passage_tf.end()) {
                dot += w * it->second * idf(term);
            }
        }
        double passage_norm = 0.0;
        for (const auto& [term, count] : passage_tf) {
            const double w = count * idf(term);
            passage_norm += w * w;
        }
        passage_norm = std::sqrt(passage_norm);
        if (passage_norm > 0.0) {
            f[Feature::TfidfCosine] = std::clamp(dot / (claim_norm_ * passage_norm), 0.0, 1.0);
        }
    }

    if (!claim_tokens_.empty()) {
        f[Feature::MaxNgramMatch] = static_cast<double>(longest_common_run(claim_tokens_, passage)) /
                                    claim_tokens_.size();
    }

    if (!claim_bigrams_.empty()) {
        std::unordered_set<std::string> passage_bigrams;
        for (std::size_t i = 0; i + 1 < passage.size(); ++i) {
            passage_bigrams.insert(bigram_key(passage[i], passage[i + 1]));
        }
        std::size_t hits = 0;
        for (const auto& bg : claim_bigrams_) hits += passage_bigrams.contains(bg) ? 1 : 0;
        f[Feature::BigramOverlap] = static_cast<double>(hits) / claim_bigrams_.size();
    }

    if (!title_set_.empty()) {
        std::size_t hits = 0;
        for (const auto& t : title_set_) hits += passage_tf.contains(t) ? 1 : 0;
        f[Feature::TitleOverlap] = static_cast<double>(hits) / title_set_.size();
    }

    if (!claim_tokens_.empty()) {
        f[Feature::LogLenRatio] = std::log(static_cast<double>(passage.size()) /
                                           static_cast<double>(claim_tokens_.size()));
    }
    return f;
}

FeatureVector extract_features(const ClaimContext& ctx, std::string_view passage_text,
                               const IdfLookup& idf) {
    return ClaimFeaturizer(ctx, idf).featurize(passage_text);
}

// ---------------------------------------------------------------------------
// CrossScorer

CrossScorer::CrossScorer(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.size() != kFeatureCount) {
        throw ArityMismatch("scorer has " + std::to_string(weights_.size()) +
                            " weights, expected " + std::to_string(kFeatureCount));
    }
    for (double w : weights_) {
        if (!std::isfinite(w)) throw std::invalid_argument("scorer weights must be finite");
    }
}

CrossScorer CrossScorer::initial() {
    std::vector<double> w(kFeatureCount, 0.0);
    for (auto f : {Feature::JaccardUnigram, Feature::ClaimCoverage, Feature::TfidfCosine,
                   Feature::MaxNgramMatch, Feature::BigramOverlap, Feature::TitleOverlap}) {
        w[static_cast<std::size_t>(f)] = 1.0;
    }
    return CrossScorer(std::move(w));
}

void CrossScorer::save(std::ostream& out) const {
    out << kScorerHeader << ' ' << kScorerVersion << '\n';
    char buf[64];
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", weights_[i]);
        out << kFeatureNames[i] << ' ' << buf << '\n';
    }
}

void CrossScorer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save(out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

CrossScorer CrossScorer::load(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError(source_name, lineno, "empty scorer file");
    {
        std::istringstream header(line);
        std::string tag;
        int version = 0;
        if (!(header >> tag >> version) || tag != kScorerHeader) {
            throw ParseError(source_name, lineno, "missing '" + std::string(kScorerHeader) + "' header");
        }
        if (version != kScorerVersion) {
            throw ParseError(source_name, lineno,
                             "unsupported scorer version " + std::to_string(version));
        }
    }
    std::vector<double> weights;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream row(line);
        std::string name;
        double value = 0.0;
        if (!(row >> name >> value)) throw ParseError(source_name, lineno, "expected 'name weight'");
        if (weights.size() >= kFeatureCount || name != kFeatureNames[weights.size()]) {
            throw ParseError(source_name, lineno,
                             "unexpected feature '" + name + "'" +
                                 (weights.size() < kFeatureCount
                                      ? ", expected '" + std::string(kFeatureNames[weights.size()]) + "'"
                                      : std::string()));
        }
        weights.push_back(value);
    }
    if (weights.size() != kFeatureCount) {
        throw ParseError(source_name, lineno,
                         "expected " + std::to_string(kFeatureCount) + " features, found " +
                             std::to_string(weights.size()));
    }
    return CrossScorer(std::move(weights));
}

CrossScorer CrossScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return load(in, path.string());
}

double score_passage(const CrossScorer& scorer, std::span<const double> features) {
    const auto w = scorer.weights();
    if (w.size() != features.size()) {
        throw ArityMismatch("scorer has " + std::to_string(w.size()) + " weights, features have " +
                            std::to_string(features.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * features[i];
    return s;
}

double score_passage(const CrossScorer& scorer, const FeatureVector& features) {
    return score_passage(scorer, std::span<const double>(features.values));
}

// ---------------------------------------------------------------------------
// Document scoring and reranking

VerificationResult score_document(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                  std::string doc_url, std::span<const PassageRef> passages,
                                  double threshold) {
    if (passages.empty()) throw EmptyDocument("document '" + doc_url + "' has no passages");
    VerificationResult r;
    r.doc_url = std::move(doc_url);
    for (std::size_t i = 0; i < passages.size(); ++i) {
        const double s = score_passage(scorer, claim.featurize(passages[i].text));
        if (i == 0 || s > r.score) {
            r.score = s;
            r.best_passage_index = i;
            r.best_passage_id = passages[i].id;
        }
    }
    r.flagged = r.score < threshold;
    return r;
}

VerificationResult score_document(const CrossScorer& scorer, const ClaimContext& ctx,
                                  std::string doc_url, std::span<const PassageRef> passages,
                                  double threshold) {
    return score_document(scorer, ClaimFeaturizer(ctx), std::move(doc_url), passages, threshold);
}

double score_document_prefix(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                             const Document& doc, std::size_t budget_words) {
    if (budget_words == 0) throw std::invalid_argument("budget_words must be >= 1");
    const auto words = split_words(doc.text);
    const auto text = join_words(words, 0, std::min(words.size(), budget_words));
    return score_passage(scorer, claim.featurize(text));
}

double score_document_prefix(const CrossScorer& scorer, const ClaimContext& ctx,
                             const Document& doc, std::size_t budget_words) {
    return score_document_prefix(scorer, ClaimFeaturizer(ctx), doc, budget_words);
}

VerificationResult score_whole_document(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                        const Document& doc, std::size_t window_words,
                                        std::size_t stride_words, double threshold) {
    const auto passages = chunk_document(doc, window_words, stride_words);
    std::vector<PassageRef> refs;
    refs.reserve(std::max<std::size_t>(1, passages.size()));
    for (const auto& p : passages) refs.push_back(PassageRef{static_cast<PassageId>(p.index), p.text});
    if (refs.empty()) refs.push_back(PassageRef{0, std::string_view{}});
    return score_document(scorer, claim, doc.url, refs, threshold);
}

RerankOutcome decide(VerificationResult original, std::vector<VerificationResult> candidates) {
    RerankOutcome out;
    out.ranked.reserve(candidates.size() + 1);
    out.ranked.push_back(RankedDocument{std::move(original), true});
    for (auto& c : candidates) out.ranked.push_back(RankedDocument{std::move(c), false});
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const RankedDocument& a, const RankedDocument& b) {
                         if (a.result.score != b.result.score) return a.result.score > b.result.score;
                         if (a.is_original != b.is_original) return a.is_original;
                         return a.result.doc_url < b.result.doc_url;
                     });
    for (std::size_t i = 0; i < out.ranked.size(); ++i) {
        if (out.ranked[i].is_original) out.original_rank = i;
    }
    if (out.original_rank != 0) out.recommendation = out.ranked.front().result;
    return out;
}

std::vector<VerificationResult> score_candidates(const CrossScorer& scorer,
                                                 const ClaimFeaturizer& claim,
                                                 std::span<const Candidate> candidates,
                                                 const PassageStore& store, double threshold,
                                                 std::string_view exclude_url) {
    std::vector<std::string_view> order;
    std::unordered_map<std::string_view, std::vector<PassageRef>> by_doc;
    for (const auto& c : candidates) {
        if (!exclude_url.empty() && c.doc_url == exclude_url) continue;
        auto [it, inserted] = by_doc.try_emplace(c.doc_url);
        if (inserted) order.push_back(c.doc_url);
        it->second.push_back(PassageRef{c.passage_id, store.at(c.passage_id).text});
    }

    std::vector<VerificationResult> docs;
    docs.reserve(order.size());
    for (const auto url : order) {
        auto& refs = by_doc[url];
        std::sort(refs.begin(), refs.end(),
                  [](const PassageRef& a, const PassageRef& b) { return a.id < b.id; });
        refs.erase(std::unique(refs.begin(), refs.end(),
                               [](const PassageRef& a, const PassageRef& b) { return a.id == b.id; }),
                   refs.end());
        docs.push_back(score_document(scorer, claim, std::string(url), refs, threshold));
    }
    std::sort(docs.begin(), docs.end(), [](const VerificationResult& a, const VerificationResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_url < b.doc_url;
    });
    return docs;
}

RerankOutcome rerank(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                     std::span<const Candidate> candidates, const Document& original,
                     const PassageStore& store, double threshold) {
    auto docs = score_candidates(scorer, claim, candidates, store, threshold, original.url);

    VerificationResult orig;
    if (const auto ids = store.passages_of(original.url); !ids.empty()) {
        std::vector<PassageRef> refs;
        refs.reserve(ids.size());
        for (auto id : ids) refs.push_back(PassageRef{id, store.at(id).text});
        orig = score_document(scorer, claim, original.url, refs, threshold);
    } else {
        orig = score_whole_document(scorer, claim, original, store.window_words(),
                                    store.stride_words(), threshold);
    }
    return decide(std::move(orig), std::move(docs));
}

std::vector<PassageId> mine_negatives(const CandidateRetriever& retrieve,
                                      const WaferInstance& inst, std::size_t n,
                                      const PassageStore& store) {
    std::vector<PassageId> out;
    if (n == 0) return out;
    for (const auto& hit : retrieve(extract_claim_context(inst))) {
        if (store.at(hit.passage_id).doc_url == inst.cited_url) continue;
        out.push_back(hit.passage_id);
        if (out.size() == n) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training

ListwiseLoss listwise_loss(const CrossScorer& scorer, const FeatureVector& positive,
                           std::span<const FeatureVector> negatives) {
    std::vector<const FeatureVector*> items;
    items.reserve(negatives.size() + 1);
    items.push_back(&positive);
    for (const auto& f : negatives) items.push_back(&f);

    std::vector<double> logits;
    logits.reserve(items.size());
    for (const auto* f : items) logits.push_back(score_passage(scorer, *f));
    const double max = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) {
        l = std::exp(l - max);
        z += l;
    }

    ListwiseLoss out;
    out.loss = (max + std::log(z)) - score_passage(scorer, positive);
    for (std::size_t k = 0; k < items.size(); ++k) {
        const double coeff = logits[k] / z - (k == 0 ? 1.0 : 0.0);
        for (std::size_t i = 0; i < kFeatureCount; ++i) out.gradient[i] += coeff * items[k]->values[i];
    }
    return out;
}

namespace {

bool has_overlap(const FeatureVector& f) {
    for (auto feat : {Feature::JaccardUnigram, Feature::ClaimCoverage, Feature::TfidfCosine,
                      Feature::MaxNgramMatch, Feature::BigramOverlap, Feature::TitleOverlap}) {
        if (f[feat] != 0.0) return true;
    }
    return false;
}

struct PreparedInstance {
    std::vector<FeatureVector> gold;
    std::vector<FeatureVector> negatives;
};

std::size_t best_index(const CrossScorer& scorer, std::span<const FeatureVector> passages) {
    std::size_t best = 0;
    double best_score = score_passage(scorer, passages[0]);
    for (std::size_t i = 1; i < passages.size(); ++i) {
        const double s = score_passage(scorer, passages[i]);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

}  // namespace

EmReport train_em(CrossScorer scorer, std::span<const WaferInstance> instances,
                  const CandidateRetriever& retrieve, const PassageStore& store,
                  const EmTraining& options, const IdfLookup& idf) {
    EmReport report;
    std::vector<PreparedInstance> prepared;
    prepared.reserve(instances.size());

    for (const auto& inst : instances) {
        const auto gold_ids = store.passages_of(inst.cited_url);
        std::optional<ClaimContext> ctx;
        try {
            ctx = extract_claim_context(inst);
        } catch (const NoClaim&) {
        }
        if (gold_ids.empty() || !ctx) {
            report.skipped_ids.push_back(inst.instance_id);
            continue;
        }
        const ClaimFeaturizer claim(*ctx, idf);
        PreparedInstance p;
        for (auto id : gold_ids) p.gold.push_back(claim.featurize(store.at(id).text));
        if (std::none_of(p.gold.begin(), p.gold.end(), has_overlap)) {
            report.skipped_ids.push_back(inst.instance_id);
            continue;
        }
        for (auto id : mine_negatives(retrieve, inst, options.negatives, store)) {
            p.negatives.push_back(claim.featurize(store.at(id).text));
        }
        prepared.push_back(std::move(p));
    }
    report.skipped_instances = report.skipped_ids.size();

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& p : prepared) {
            const auto& positive = p.gold[best_index(scorer, p.gold)];  // E-step
            const auto step = listwise_loss(scorer, positive, p.negatives);
            total += step.loss;
            auto w = scorer.weights();
            for (std::size_t i = 0; i < kFeatureCount; ++i) {
                w[i] -= options.learning_rate * step.gradient[i];  // M-step
            }
        }
        report.epoch_losses.push_back(prepared.empty() ? 0.0 : total / prepared.size());
    }
    report.scorer = std::move(scorer);
    return report;
}

CrossScorer calibrate_bias(CrossScorer scorer, std::span<const double> reference_scores,
                           double quantile, double threshold) {
    if (reference_scores.empty()) throw EmptyInput("no reference scores to calibrate against");
    if (!(quantile >= 0.0 && quantile <= 1.0)) {
        throw std::invalid_argument("quantile must lie in [0, 1]");
    }
    std::vector<double> sorted(reference_scores.begin(), reference_scores.end());
    std::sort(sorted.begin(), sorted.end());
    const auto pos = static_cast<std::size_t>(std::floor(quantile * (sorted.size() - 1)));
    scorer.weights()[static_cast<std::size_t>(Feature::Bias)] += threshold - sorted[pos];
    return scorer;
}

Passage select_annotation_passage(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                                  const Document& doc, std::size_t window_words) {
    const std::size_t stride = std::max<std::size_t>(1, window_words / 2);
    auto windows = chunk_document(doc, window_words, stride);
    if (windows.empty()) throw EmptyDocument("document '" + doc.url + "' has no words");
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const double s = score_passage(scorer, claim.featurize(windows[i].text));
        if (i == 0 || s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return std::move(windows[best]);
}

}  // namespace citeverify
