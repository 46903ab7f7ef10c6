#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citeverify/corpus.hpp"
#include "citeverify/sparse.hpp"

namespace citeverify {

/// A retrieved passage with the rank and score it got from each retriever.
/// Ranks are 1-based.
struct Candidate {
    PassageId passage_id = 0;
    std::string doc_url;
    std::optional<std::size_t> sparse_rank;
    std::optional<std::size_t> dense_rank;
    std::optional<double> sparse_score;
    std::optional<double> dense_score;

    bool operator==(const Candidate&) const = default;
};

/// Union of two ranked lists keyed by passage id. Output alternates
/// sparse[0], dense[0], sparse[1], dense[1], ..., skipping passages already
/// emitted. Scores are not normalised across retrievers.
std::vector<Candidate> merge(std::span<const ScoredPassage> sparse_top,
                             std::span<const ScoredPassage> dense_top, const PassageStore& store);

}  // namespace citeverify
