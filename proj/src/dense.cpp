#include "citeverify/dense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <unordered_set>

#include "binio.hpp"
#include "citeverify/errors.hpp"
#include "citeverify/simd.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

namespace {

constexpr std::string_view kEncoderMagic = "CVENCODR";
constexpr std::string_view kVectorIndexMagic = "CVVECIDX";
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint64_t kSignSalt = 0x5ca1ab1e0ddba11ULL;

}  // namespace

FeatureHashEncoder::FeatureHashEncoder(const EncoderConfig& config) : config_(config) {
    if (config.d_out == 0 || config.d_in < config.d_out) {
        throw std::invalid_argument("encoder requires d_in >= d_out >= 1");
    }
    if (config.d_in > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("encoder d_in must fit in 32 bits");
    }
    if (!(config.temperature > 0.0)) {
        throw std::invalid_argument("encoder temperature must be positive");
    }
    projection_.resize(config.d_in * config.d_out);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.d_out)));
    for (auto& v : projection_) v = normal(rng);
}

void FeatureHashEncoder::fit_idf(std::span<const std::string> texts) {
    std::map<std::string, std::size_t> df;
    for (const auto& text : texts) {
        auto tokens = tokenize(text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& t : tokens) ++df[t];
    }
    idf_.clear();
    for (const auto& [term, count] : df) idf_.emplace(term, bm25_idf(texts.size(), count));
    unseen_idf_ = bm25_idf(texts.size(), 0);
}

void FeatureHashEncoder::fit_idf(std::span<const Passage> passages) {
    std::vector<std::string> texts;
    texts.reserve(passages.size());
    for (const auto& p : passages) texts.push_back(p.text);
    fit_idf(texts);
}

double FeatureHashEncoder::idf(std::string_view term) const {
    const auto it = idf_.find(std::string(term));
    return it == idf_.end() ? unseen_idf_ : it->second;
}

std::uint32_t FeatureHashEncoder::bucket(std::string_view term) const {
    return static_cast<std::uint32_t>(stable_hash(term, config_.seed) % config_.d_in);
}

double FeatureHashEncoder::sign(std::string_view term) const {
    return (stable_hash(term, config_.seed ^ kSignSalt) & 1) ? -1.0 : 1.0;
}

std::vector<FeatureHashEncoder::Feature> FeatureHashEncoder::features(std::string_view text) const {
    std::map<std::string, std::uint32_t> tf;
    for (auto& t : tokenize(text)) ++tf[t];
    std::map<std::uint32_t, double> by_bucket;
    for (const auto& [term, count] : tf) {
        by_bucket[bucket(term)] += sign(term) * static_cast<double>(count) * idf(term);
    }
    std::vector<Feature> out;
    out.reserve(by_bucket.size());
    for (const auto& [b, v] : by_bucket) {
        if (v != 0.0) out.push_back(Feature{b, v});
    }
    return out;
}

std::vector<double> FeatureHashEncoder::project(std::span<const Feature> features) const {
    std::vector<double> y(config_.d_out, 0.0);
    for (const auto& f : features) {
        simd::axpy(f.value, projection_.data() + std::size_t{f.bucket} * config_.d_out, y.data(),
                   y.size());
    }
    return y;
}

Embedding FeatureHashEncoder::encode(std::string_view text) const {
    Embedding e{project(features(text))};
    const double norm = std::sqrt(simd::dot(e.values.data(), e.values.data(), e.values.size()));
    if (norm > 0.0) {
        simd::scale(1.0 / norm, e.values.data(), e.values.size());
    } else {
        std::fill(e.values.begin(), e.values.end(), 0.0);
    }
    return e;
}

std::span<const double> FeatureHashEncoder::projection_row(std::uint32_t row) const {
    return std::span<const double>(projection_).subspan(std::size_t{row} * config_.d_out,
                                                        config_.d_out);
}

std::span<double> FeatureHashEncoder::projection_row(std::uint32_t row) {
    return std::span<double>(projection_).subspan(std::size_t{row} * config_.d_out,
                                                  config_.d_out);
}

void FeatureHashEncoder::set_projection(std::vector<double> values) {
    if (values.size() != config_.d_in * config_.d_out) {
        throw DimensionMismatch("projection must have d_in * d_out entries");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("projection must be finite");
    }
    projection_ = std::move(values);
}

void FeatureHashEncoder::save(std::ostream& out) const {
    out.write(kEncoderMagic.data(), kEncoderMagic.size());
    binio::put_u32(out, kFormatVersion);
    binio::put_u64(out, config_.d_in);
    binio::put_u64(out, config_.d_out);
    binio::put_u64(out, config_.seed);
    binio::put_f64(out, config_.temperature);
    binio::put_f64(out, unseen_idf_);
    binio::put_u64(out, idf_.size());
    for (const auto& [term, value] : idf_) {
        binio::put_str(out, term);
        binio::put_f64(out, value);
    }
    for (double v : projection_) binio::put_f64(out, v);
}

void FeatureHashEncoder::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save(out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

FeatureHashEncoder FeatureHashEncoder::load(std::istream& in, const std::string& source_name) {
    binio::Reader r(in, source_name);
    r.expect_magic(kEncoderMagic);
    if (const auto v = r.u32(); v != kFormatVersion) {
        r.fail("unsupported encoder version " + std::to_string(v));
    }
    FeatureHashEncoder enc;
    enc.config_.d_in = r.u64();
    enc.config_.d_out = r.u64();
    enc.config_.seed = r.u64();
    enc.config_.temperature = r.f64();
    if (enc.config_.d_out == 0 || enc.config_.d_in < enc.config_.d_out ||
        enc.config_.d_in > std::numeric_limits<std::uint32_t>::max()) {
        r.fail("invalid encoder dimensions");
    }
    enc.unseen_idf_ = r.f64();
    const auto n_idf = r.u64();
    for (std::uint64_t i = 0; i < n_idf; ++i) {
        auto term = r.str();
        enc.idf_.emplace(std::move(term), r.f64());
    }
    enc.projection_.resize(enc.config_.d_in * enc.config_.d_out);
    for (auto& v : enc.projection_) v = r.f64();
    return enc;
}

FeatureHashEncoder FeatureHashEncoder::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return load(in, path.string());
}

std::string dense_query_text(const ClaimContext& ctx) {
    return ctx.article_title + " " + ctx.section_path + " " + ctx.claim_sentence;
}

// ---------------------------------------------------------------------------
// VectorIndex

std::span<const double> VectorIndex::vector_at(std::size_t position) const {
    return std::span<const double>(values_).subspan(position * dim_, dim_);
}

void VectorIndex::add(PassageId id, const Embedding& embedding) {
    if (embedding.dim() != dim_) {
        throw DimensionMismatch("embedding has dimension " + std::to_string(embedding.dim()) +
                                ", index expects " + std::to_string(dim_));
    }
    if (!id_set_.insert(id).second) {
        throw std::invalid_argument("duplicate passage id " + std::to_string(id));
    }
    ids_.push_back(id);
    values_.insert(values_.end(), embedding.values.begin(), embedding.values.end());
}

void VectorIndex::save(std::ostream& out) const {
    out.write(kVectorIndexMagic.data(), kVectorIndexMagic.size());
    binio::put_u32(out, kFormatVersion);
    binio::put_u64(out, dim_);
    binio::put_u64(out, ids_.size());
    for (auto id : ids_) binio::put_u32(out, id);
    for (double v : values_) binio::put_f64(out, v);
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save(out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

VectorIndex VectorIndex::load(std::istream& in, const std::string& source_name) {
    binio::Reader r(in, source_name);
    r.expect_magic(kVectorIndexMagic);
    if (const auto v = r.u32(); v != kFormatVersion) {
        r.fail("unsupported vector index version " + std::to_string(v));
    }
    VectorIndex index(r.u64());
    index.ids_.resize(r.u64());
    for (auto& id : index.ids_) id = r.u32();
    index.id_set_.insert(index.ids_.begin(), index.ids_.end());
    if (index.id_set_.size() != index.ids_.size()) r.fail("duplicate passage ids");
    index.values_.resize(index.ids_.size() * index.dim_);
    for (auto& v : index.values_) v = r.f64();
    return index;
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return load(in, path.string());
}

VectorIndex build_vector_index(const FeatureHashEncoder& encoder,
                               std::span<const Passage> passages) {
    VectorIndex index(encoder.d_out());
    for (std::size_t i = 0; i < passages.size(); ++i) {
        index.add(static_cast<PassageId>(i), encoder.encode(passages[i].text));
    }
    return index;
}

std::vector<ScoredPassage> knn_search(const VectorIndex& index, const Embedding& query,
                                      std::size_t k) {
    if (k == 0) throw std::invalid_argument("knn_search requires k >= 1");
    if (query.dim() != index.dim()) {
        throw DimensionMismatch("query has dimension " + std::to_string(query.dim()) +
                                ", index has " + std::to_string(index.dim()));
    }
    std::vector<double> scores(index.size());
    simd::dot_rows(query.values.data(), index.matrix().data(), index.dim(), index.size(),
                   scores.data());
    std::vector<ScoredPassage> hits(index.size());
    const auto ids = index.ids();
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] = ScoredPassage{ids[i], scores[i]};
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      ranks_before);
    hits.resize(keep);
    return hits;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Encoded {
    std::vector<FeatureHashEncoder::Feature> features;
    std::vector<double> unit;  // normalised projection, zeros if norm == 0
    double norm = 0.0;
};

Encoded encode_for_training(const FeatureHashEncoder& enc, std::string_view text) {
    Encoded e;
    e.features = enc.features(text);
    e.unit = enc.project(e.features);
    e.norm = std::sqrt(simd::dot(e.unit.data(), e.unit.data(), e.unit.size()));
    if (e.norm > 0.0) {
        simd::scale(1.0 / e.norm, e.unit.data(), e.unit.size());
    } else {
        std::fill(e.unit.begin(), e.unit.end(), 0.0);
    }
    return e;
}

// Backpropagates dL/d(unit) through the normalisation and the projection.
void accumulate_projection_grad(const Encoded& e, std::vector<double> d_unit, RowGradient& grad) {
    if (e.norm == 0.0) return;
    const std::size_t d = d_unit.size();
    const double radial = simd::dot(e.unit.data(), d_unit.data(), d);
    simd::axpy(-radial, e.unit.data(), d_unit.data(), d);
    simd::scale(1.0 / e.norm, d_unit.data(), d);
    for (const auto& f : e.features) {
        auto& row = grad[f.bucket];
        if (row.empty()) row.assign(d, 0.0);
        simd::axpy(f.value, d_unit.data(), row.data(), d);
    }
}

void apply_gradient(FeatureHashEncoder& enc, const RowGradient& grad, double lr) {
    for (const auto& [row, g] : grad) {
        auto dst = enc.projection_row(row);
        simd::axpy(-lr, g.data(), dst.data(), dst.size());
    }
}

}  // namespace

ContrastiveLoss contrastive_loss(const FeatureHashEncoder& query_encoder,
                                 const FeatureHashEncoder& passage_encoder,
                                 std::span<const std::string> queries,
                                 std::span<const std::string> passages) {
    if (queries.size() != passages.size()) {
        throw std::invalid_argument("contrastive_loss needs one passage per query");
    }
    if (query_encoder.d_out() != passage_encoder.d_out()) {
        throw DimensionMismatch("query and passage towers differ in d_out");
    }
    const std::size_t batch = queries.size();
    const std::size_t d = query_encoder.d_out();
    const double tau = query_encoder.config().temperature;

    ContrastiveLoss out;
    if (batch == 0) return out;

    std::vector<Encoded> q, p;
    q.reserve(batch);
    p.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        q.push_back(encode_for_training(query_encoder, queries[i]));
        p.push_back(encode_for_training(passage_encoder, passages[i]));
    }

    out.probabilities.assign(batch, std::vector<double>(batch, 0.0));
    for (std::size_t i = 0; i < batch; ++i) {
        auto& row = out.probabilities[i];
        for (std::size_t j = 0; j < batch; ++j) {
            row[j] = simd::dot(q[i].unit.data(), p[j].unit.data(), d) / tau;
        }
        const double target = row[i];
        const double max = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (auto& s : row) {
            s = std::exp(s - max);
            z += s;
        }
        for (auto& s : row) s /= z;
        out.loss += (max + std::log(z)) - target;
    }
    out.loss /= static_cast<double>(batch);

    // dL/ds_ij = (P_ij - [i == j]) / B, and s_ij = <q_i, p_j> / tau.
    std::vector<std::vector<double>> d_q(batch, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> d_p(batch, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < batch; ++j) {
            const double g =
                (out.probabilities[i][j] - (i == j ? 1.0 : 0.0)) / (static_cast<double>(batch) * tau);
            simd::axpy(g, p[j].unit.data(), d_q[i].data(), d);
            simd::axpy(g, q[i].unit.data(), d_p[j].data(), d);
        }
    }
    for (std::size_t i = 0; i < batch; ++i) {
        accumulate_projection_grad(q[i], std::move(d_q[i]), out.query_grad);
        accumulate_projection_grad(p[i], std::move(d_p[i]), out.passage_grad);
    }
    return out;
}

namespace {

void train_towers(FeatureHashEncoder& query_encoder, FeatureHashEncoder* passage_encoder,
                  std::span<const BiEncoderExample> examples, const BiEncoderTraining& options,
                  std::vector<double>* loss_log) {
    if (options.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    FeatureHashEncoder& passage_tower = passage_encoder ? *passage_encoder : query_encoder;

    std::vector<std::string> queries, passages;
    queries.reserve(examples.size());
    passages.reserve(examples.size());
    for (const auto& ex : examples) {
        queries.push_back(dense_query_text(ex.context));
        passages.push_back(ex.gold.text);
    }

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t start = 0; start < examples.size(); start += options.batch_size) {
            const std::size_t n = std::min(options.batch_size, examples.size() - start);
            const auto result =
                contrastive_loss(query_encoder, passage_tower,
                                 std::span<const std::string>(queries).subspan(start, n),
                                 std::span<const std::string>(passages).subspan(start, n));
            if (loss_log) loss_log->push_back(result.loss);
            apply_gradient(query_encoder, result.query_grad, options.learning_rate);
            apply_gradient(passage_tower, result.passage_grad, options.learning_rate);
        }
    }
}

}  // namespace

FeatureHashEncoder train_biencoder(FeatureHashEncoder encoder,
                                   std::span<const BiEncoderExample> examples,
                                   const BiEncoderTraining& options,
                                   std::vector<double>* loss_log) {
    train_towers(encoder, nullptr, examples, options, loss_log);
    return encoder;
}

void train_biencoder(FeatureHashEncoder& query_encoder, FeatureHashEncoder& passage_encoder,
                     std::span<const BiEncoderExample> examples,
                     const BiEncoderTraining& options, std::vector<double>* loss_log) {
    if (query_encoder.d_out() != passage_encoder.d_out()) {
        throw DimensionMismatch("query and passage towers differ in d_out");
    }
    train_towers(query_encoder, &passage_encoder, examples, options, loss_log);
}

}  // namespace citeverify
