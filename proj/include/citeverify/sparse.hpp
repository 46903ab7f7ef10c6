#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "citeverify/corpus.hpp"

namespace citeverify {

/// Okapi BM25 parameters. The defaults are the usual Okapi settings.
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredPassage {
    PassageId passage_id = 0;
    double score = 0.0;

    bool operator==(const ScoredPassage&) const = default;
};

/// Descending score, ascending id on ties.
inline bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_id < b.passage_id;
}

/// Bag of query tokens. Repeated tokens count once per occurrence.
struct SparseQuery {
    std::vector<std::string> terms;
};

/// Query terms collapsed to (term, multiplicity) in lexicographic term order.
/// Every BM25 routine sums per-term contributions in this order, which makes
/// search() and bm25_score() agree bit for bit.
std::vector<std::pair<std::string, std::uint32_t>> weighted_terms(const SparseQuery& query);

/// Non-negative BM25 idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_idf(std::size_t n_passages, std::size_t df);

/// BM25 weight of one query term occurrence in a passage.
double bm25_term_weight(double idf, double tf, double passage_len, double avgdl,
                        const Bm25Params& params);

class InvertedIndex {
public:
    struct Posting {
        PassageId passage_id;
        std::uint32_t tf;

        bool operator==(const Posting&) const = default;
    };

    InvertedIndex() = default;

    /// Passage ids are positions in `passages`. Throws EmptyCorpus when empty.
    static InvertedIndex build(std::span<const Passage> passages);
    /// Same, from raw passage texts.
    static InvertedIndex build_from_texts(std::span<const std::string> texts);

    std::size_t passage_count() const { return doc_len_.size(); }
    double avgdl() const { return avgdl_; }
    std::uint32_t doc_len(PassageId id) const;
    std::size_t df(std::string_view term) const;
    double idf(std::string_view term) const { return bm25_idf(passage_count(), df(term)); }
    /// Sorted by passage id; empty for unseen terms.
    std::span<const Posting> postings(std::string_view term) const;
    /// Vocabulary in lexicographic order.
    std::span<const std::string> terms() const { return terms_; }

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(std::istream& in, const std::string& source_name);
    static InvertedIndex load(const std::filesystem::path& path);

    bool operator==(const InvertedIndex& other) const {
        return terms_ == other.terms_ && postings_ == other.postings_ &&
               doc_len_ == other.doc_len_ && avgdl_ == other.avgdl_;
    }

private:
    void rebuild_lookup();

    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_len_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
};

/// Throws UnknownPassage for ids outside the index.
double bm25_score(const InvertedIndex& index, const SparseQuery& query, PassageId passage_id,
                  const Bm25Params& params = {});

/// Top-k passages with positive score, ordered by ranks_before().
std::vector<ScoredPassage> search(const InvertedIndex& index, const SparseQuery& query,
                                  std::size_t k, const Bm25Params& params = {});

/// Article title tokens, then claim sentence tokens, then `expansion`.
SparseQuery build_query(const ClaimContext& ctx, std::span<const std::string> expansion = {});

/// The m most salient tokens of the preceding text and section path, by
/// tf * idf against `background`; ties resolve lexicographically.
std::vector<std::string> expand_query(const ClaimContext& ctx, std::size_t m,
                                      const InvertedIndex& background);

}  // namespace citeverify
