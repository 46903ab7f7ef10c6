#pragma once

// Seeded generator for a small claim/citation corpus with known answers.
//
// Every entity gets one gold document, whose evidence sentence paraphrases
// the claim (in order, some words swapped for synonyms), and several
// distractors that repeat the entity name and share its vocabulary in
// scrambled order. Evidence can sit past the first few hundred words of the
// gold document. Failed citations point at generic homepages.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "citeverify/corpus.hpp"

namespace citeverify {

struct SyntheticOptions {
    std::uint64_t seed = 7;
    std::size_t entities = 100;          // one supported claim each
    std::size_t failed_claims = 20;      // each cites a generic homepage
    std::size_t distractors_per_entity = 3;
    std::size_t background_documents = 80;
    std::size_t topics = 12;
    std::size_t fact_words = 10;         // content words per claim
    double featured_share = 0.3;
    double synonym_rate = 0.25;          // fact words paraphrased in the evidence
    double deep_evidence_share = 0.5;    // evidence placed after word 350
    double distractor_fact_share = 0.3;  // fact words leaked into each distractor
    std::size_t distractor_name_mentions = 3;
    double shallow_gold_share = 0.25;    // gold documents hosted at a site root
};

struct SyntheticCorpus {
    std::vector<Document> documents;
    std::vector<WaferInstance> instances;
};

SyntheticCorpus generate_synthetic(const SyntheticOptions& options = {});

}  // namespace citeverify
