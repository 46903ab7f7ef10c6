#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "citeverify/corpus.hpp"
#include "citeverify/sparse.hpp"

namespace citeverify {

/// Unit-length dense vector, or all zeros for text without tokens.
struct Embedding {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

struct EncoderConfig {
    std::size_t d_in = std::size_t{1} << 18;  // hash buckets
    std::size_t d_out = 64;
    std::uint64_t seed = 0;
    double temperature = 1.0;
};

/// Hashed tf-idf bag of words followed by a trainable linear projection.
///
/// bucket(t) = hash(t, seed) mod d_in, with an independent sign hash to
/// cancel collisions in expectation. A text maps to the sparse vector
/// x[bucket(t)] += sign(t) * tf(t) * idf(t), then to x^T P (d_in x d_out,
/// row-major), then to unit length.
class FeatureHashEncoder {
public:
    struct Feature {
        std::uint32_t bucket;
        double value;
    };

    FeatureHashEncoder() = default;
    /// Projection initialised with N(0, 1/d_out) entries drawn from `seed`.
    /// Requires d_in >= d_out >= 1.
    explicit FeatureHashEncoder(const EncoderConfig& config);

    const EncoderConfig& config() const { return config_; }
    std::size_t d_in() const { return config_.d_in; }
    std::size_t d_out() const { return config_.d_out; }

    /// Replaces the idf table with BM25-style idf over `texts`.
    void fit_idf(std::span<const std::string> texts);
    void fit_idf(std::span<const Passage> passages);
    /// Term idf; terms missing from the table get the df = 0 value, or 1
    /// before any fit.
    double idf(std::string_view term) const;
    const std::map<std::string, double>& idf_table() const { return idf_; }

    std::uint32_t bucket(std::string_view term) const;
    double sign(std::string_view term) const;

    /// Sparse input vector, merged per bucket, ascending bucket order.
    std::vector<Feature> features(std::string_view text) const;
    /// x^T P before normalisation.
    std::vector<double> project(std::span<const Feature> features) const;
    Embedding encode(std::string_view text) const;

    std::span<const double> projection() const { return projection_; }
    std::span<double> projection() { return projection_; }
    std::span<const double> projection_row(std::uint32_t row) const;
    std::span<double> projection_row(std::uint32_t row);
    /// Throws DimensionMismatch unless values.size() == d_in * d_out.
    void set_projection(std::vector<double> values);

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static FeatureHashEncoder load(std::istream& in, const std::string& source_name);
    static FeatureHashEncoder load(const std::filesystem::path& path);

    bool operator==(const FeatureHashEncoder& other) const {
        return config_.d_in == other.config_.d_in && config_.d_out == other.config_.d_out &&
               config_.seed == other.config_.seed &&
               config_.temperature == other.config_.temperature && idf_ == other.idf_ &&
               unseen_idf_ == other.unseen_idf_ && projection_ == other.projection_;
    }

private:
    EncoderConfig config_;
    std::map<std::string, double> idf_;
    double unseen_idf_ = 1.0;
    std::vector<double> projection_;
};

/// Text the query tower sees for a claim: article title, section path and
/// claim sentence.
std::string dense_query_text(const ClaimContext& ctx);

/// Exact inner-product index. Passage ids are unique.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::span<const PassageId> ids() const { return ids_; }
    std::span<const double> vector_at(std::size_t position) const;
    std::span<const double> matrix() const { return values_; }

    /// Throws DimensionMismatch on a wrong-sized embedding and
    /// std::invalid_argument on a duplicate id.
    void add(PassageId id, const Embedding& embedding);

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(std::istream& in, const std::string& source_name);
    static VectorIndex load(const std::filesystem::path& path);

    bool operator==(const VectorIndex& other) const {
        return dim_ == other.dim_ && ids_ == other.ids_ && values_ == other.values_;
    }

private:
    std::size_t dim_;
    std::vector<PassageId> ids_;
    std::unordered_set<PassageId> id_set_;
    std::vector<double> values_;  // size() x dim(), row-major
};

/// One entry per passage; ids are positions in `passages`.
VectorIndex build_vector_index(const FeatureHashEncoder& encoder,
                               std::span<const Passage> passages);

/// Exhaustive search: descending inner product, ascending id on ties.
/// Throws DimensionMismatch when the query dimension differs from the index.
std::vector<ScoredPassage> knn_search(const VectorIndex& index, const Embedding& query,
                                      std::size_t k);

// --------------------------------------------------------------------------
// Contrastive training with in-batch negatives

struct BiEncoderExample {
    ClaimContext context;
    Passage gold;
};

struct BiEncoderTraining {
    std::size_t batch_size = 16;
    double learning_rate = 0.5;
    std::size_t epochs = 5;
};

/// Sparse gradient with respect to a projection matrix, keyed by row.
using RowGradient = std::map<std::uint32_t, std::vector<double>>;

struct ContrastiveLoss {
    double loss = 0.0;
    /// Row-stochastic score matrix softmax(<q_i, p_j> / tau), batch x batch.
    std::vector<std::vector<double>> probabilities;
    RowGradient query_grad;
    RowGradient passage_grad;
};

/// Mean over the batch of -log softmax(s_i)_i with s_ij = <q_i, p_j> / tau;
/// q and p are the normalised encodings of queries[i] and passages[j].
/// Gradients cover the projection only.
ContrastiveLoss contrastive_loss(const FeatureHashEncoder& query_encoder,
                                 const FeatureHashEncoder& passage_encoder,
                                 std::span<const std::string> queries,
                                 std::span<const std::string> passages);

/// Shared-tower training. Returns the updated encoder; `loss_log`, when
/// given, receives the loss of every batch before its update.
FeatureHashEncoder train_biencoder(FeatureHashEncoder encoder,
                                   std::span<const BiEncoderExample> examples,
                                   const BiEncoderTraining& options,
                                   std::vector<double>* loss_log = nullptr);

/// Two-tower training; the towers must have equal d_out.
void train_biencoder(FeatureHashEncoder& query_encoder, FeatureHashEncoder& passage_encoder,
                     std::span<const BiEncoderExample> examples,
                     const BiEncoderTraining& options, std::vector<double>* loss_log = nullptr);

}  // namespace citeverify
