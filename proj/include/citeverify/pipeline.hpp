#pragma once

// End-to-end orchestration: index building, training, claim verification
// and evaluation over a document collection and a claim-citation set.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeverify/config.hpp"
#include "citeverify/corpus.hpp"
#include "citeverify/dense.hpp"
#include "citeverify/evaluation.hpp"
#include "citeverify/fusion.hpp"
#include "citeverify/sparse.hpp"
#include "citeverify/verifier.hpp"

namespace citeverify {

struct RetrievalSettings {
    std::size_t k_sparse = 100;
    std::size_t k_dense = 100;
    std::size_t expansion_terms = 5;
    Bm25Params bm25;
};

struct Retrieval {
    std::vector<ScoredPassage> sparse;
    std::vector<ScoredPassage> dense;
    std::vector<Candidate> fused;
};

/// Sparse + dense retrieval over one passage store. Holds references only.
class HybridRetriever {
public:
    HybridRetriever(const PassageStore& store, const InvertedIndex& sparse,
                    const FeatureHashEncoder& query_encoder, const VectorIndex& dense,
                    RetrievalSettings settings);

    SparseQuery sparse_query(const ClaimContext& ctx) const;
    std::vector<ScoredPassage> retrieve_sparse(const ClaimContext& ctx) const;
    std::vector<ScoredPassage> retrieve_dense(const ClaimContext& ctx) const;
    Retrieval retrieve(const ClaimContext& ctx) const;
    /// Fused candidates in merge order, as a ranked list for negative mining.
    CandidateRetriever as_candidate_retriever() const;

    const PassageStore& store() const { return store_; }

private:
    const PassageStore& store_;
    const InvertedIndex& sparse_;
    const FeatureHashEncoder& query_encoder_;
    const VectorIndex& dense_;
    RetrievalSettings settings_;
};

/// Everything the pipeline keeps in memory.
struct Workspace {
    PassageStore store;
    std::vector<WaferInstance> instances;
    std::vector<DatasetSplit> splits;
    InvertedIndex sparse;
    FeatureHashEncoder query_encoder;
    FeatureHashEncoder passage_encoder;
    VectorIndex dense;
    CrossScorer scorer = CrossScorer::initial();

    const DatasetSplit& split(SplitName name) const;
    /// Instances of the given splits, in input order.
    std::vector<WaferInstance> select(std::span<const SplitName> names) const;
    IdfLookup idf() const;
    HybridRetriever retriever(const PipelineConfig& config) const;
};

/// Positive passage of a gold document for dense training: the best BM25
/// passage of the document for the claim query.
std::optional<PassageId> gold_passage_for(const Workspace& ws, const HybridRetriever& retriever,
                                          const WaferInstance& inst);

// In-memory stages -----------------------------------------------------------

/// Chunks, splits and indexes with an untrained encoder.
Workspace build_workspace(const PipelineConfig& config, std::vector<Document> documents,
                          std::vector<WaferInstance> instances);

struct TrainReport {
    std::vector<double> biencoder_losses;
    EmReport em;
    std::size_t biencoder_examples = 0;
    double bias_shift = 0.0;
};

/// Trains the encoder(s) on the train split, re-encodes the dense index,
/// then runs EM for the scorer and calibrates its bias.
TrainReport train_workspace(const PipelineConfig& config, Workspace& ws);

struct VerifiedClaim {
    WaferInstance instance;
    ClaimContext context;
    RerankOutcome outcome;
};

VerifiedClaim verify_instance(const PipelineConfig& config, const Workspace& ws,
                              const HybridRetriever& retriever, const WaferInstance& inst);
nlohmann::json to_json(const VerifiedClaim& claim, const PassageStore& store,
                       std::size_t max_ranked = 10);

/// Retrieval metrics on `retrieval_splits` and failed-verification curves on
/// featured citations of `retrieval_splits` against every fail-dev/fail-test
/// citation.
MetricReport evaluate_workspace(const PipelineConfig& config, const Workspace& ws,
                                std::span<const SplitName> retrieval_splits);

/// Retrieval metrics over precomputed rankings.
MetricReport evaluate_rankings(std::span<const RankedResult> results);
RankedResult ranked_result_from_json(const nlohmann::json& j);

// On-disk stages -------------------------------------------------------------

/// Reads inputs, writes the sparse index, untrained encoders, dense index and
/// splits under config.artifacts_dir.
void build_index(const PipelineConfig& config);
/// Loads what build_index wrote, trains, and overwrites encoders, dense
/// index and scorer.
TrainReport train(const PipelineConfig& config);
/// Inputs plus every artifact. Throws IoError naming a missing file.
Workspace load_workspace(const PipelineConfig& config);

nlohmann::json splits_to_json(std::span<const DatasetSplit> splits);
std::vector<DatasetSplit> splits_from_json(const nlohmann::json& j);

}  // namespace citeverify
