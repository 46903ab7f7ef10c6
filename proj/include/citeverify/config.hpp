#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "citeverify/corpus.hpp"
#include "citeverify/dense.hpp"
#include "citeverify/sparse.hpp"
#include "citeverify/verifier.hpp"

namespace citeverify {

/// `key = value` lines; '#' starts a comment. Keys are unique.
class KeyValueFile {
public:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };

    /// Throws ConfigError naming source and line on a malformed line or a
    /// repeated key.
    static KeyValueFile parse(std::istream& in, const std::string& source_name);
    static KeyValueFile load(const std::filesystem::path& path);

    const std::string& source() const { return source_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    std::string source_;
    std::map<std::string, Entry> entries_;
};

struct PipelineConfig {
    // inputs
    std::filesystem::path documents = "documents.jsonl";
    std::filesystem::path instances = "instances.jsonl";
    // artifacts
    std::filesystem::path artifacts_dir = "artifacts";
    std::filesystem::path annotations = "annotations.jsonl";

    std::size_t window_words = kDefaultWindowWords;
    std::size_t stride_words = kDefaultWindowWords;
    std::size_t k_sparse = 100;
    std::size_t k_dense = 100;
    std::size_t expansion_terms = 5;
    Bm25Params bm25;

    EncoderConfig encoder;
    bool shared_encoder = true;
    BiEncoderTraining biencoder;

    EmTraining em;
    double flag_threshold = kDefaultFlagThreshold;
    /// Quantile of gold-citation training scores placed on flag_threshold.
    double calibration_quantile = 0.02;
    std::size_t prefix_budget_words = kDefaultPrefixBudgetWords;

    SplitRatios split_ratios;
    std::uint64_t seed = 13;

    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t queue_limit = 0;  // 0 = every claim of the review split
    std::string review_split = "test";
    std::vector<double> bucket_edges = {0.0};

    std::filesystem::path sparse_index_path() const { return artifacts_dir / "sparse.idx"; }
    std::filesystem::path dense_index_path() const { return artifacts_dir / "dense.idx"; }
    std::filesystem::path query_encoder_path() const { return artifacts_dir / "query_encoder.bin"; }
    std::filesystem::path passage_encoder_path() const {
        return artifacts_dir / "passage_encoder.bin";
    }
    std::filesystem::path scorer_path() const { return artifacts_dir / "scorer.txt"; }
    std::filesystem::path splits_path() const { return artifacts_dir / "splits.json"; }

    /// Relative paths resolve against the config file's directory. Throws
    /// ConfigError naming the file, line and key for unknown keys or bad
    /// values.
    static PipelineConfig from_file(const KeyValueFile& file,
                                    const std::filesystem::path& base_dir);
    static PipelineConfig load(const std::filesystem::path& path);

    /// Throws ConfigError for out-of-range values.
    void validate() const;
};

}  // namespace citeverify
