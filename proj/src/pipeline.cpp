#include "citeverify/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

// ---------------------------------------------------------------------------
// HybridRetriever

HybridRetriever::HybridRetriever(const PassageStore& store, const InvertedIndex& sparse,
                                 const FeatureHashEncoder& query_encoder, const VectorIndex& dense,
                                 RetrievalSettings settings)
    : store_(store),
      sparse_(sparse),
      query_encoder_(query_encoder),
      dense_(dense),
      settings_(settings) {}

SparseQuery HybridRetriever::sparse_query(const ClaimContext& ctx) const {
    const auto expansion = expand_query(ctx, settings_.expansion_terms, sparse_);
    return build_query(ctx, expansion);
}

std::vector<ScoredPassage> HybridRetriever::retrieve_sparse(const ClaimContext& ctx) const {
    return search(sparse_, sparse_query(ctx), settings_.k_sparse, settings_.bm25);
}

std::vector<ScoredPassage> HybridRetriever::retrieve_dense(const ClaimContext& ctx) const {
    if (dense_.empty()) return {};
    return knn_search(dense_, query_encoder_.encode(dense_query_text(ctx)), settings_.k_dense);
}

Retrieval HybridRetriever::retrieve(const ClaimContext& ctx) const {
    Retrieval r;
    r.sparse = retrieve_sparse(ctx);
    r.dense = retrieve_dense(ctx);
    r.fused = merge(r.sparse, r.dense, store_);
    return r;
}

CandidateRetriever HybridRetriever::as_candidate_retriever() const {
    return [this](const ClaimContext& ctx) {
        const auto r = retrieve(ctx);
        std::vector<ScoredPassage> out;
        out.reserve(r.fused.size());
        for (std::size_t i = 0; i < r.fused.size(); ++i) {
            out.push_back(ScoredPassage{r.fused[i].passage_id, -static_cast<double>(i)});
        }
        return out;
    };
}

// ---------------------------------------------------------------------------
// Workspace

const DatasetSplit& Workspace::split(SplitName name) const {
    for (const auto& s : splits) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("split '" + std::string(to_string(name)) + "' missing");
}

std::vector<WaferInstance> Workspace::select(std::span<const SplitName> names) const {
    std::unordered_set<std::string> wanted;
    for (auto n : names) {
        const auto& ids = split(n).instance_ids;
        wanted.insert(ids.begin(), ids.end());
    }
    std::vector<WaferInstance> out;
    for (const auto& inst : instances) {
        if (wanted.contains(inst.instance_id)) out.push_back(inst);
    }
    return out;
}

IdfLookup Workspace::idf() const {
    return [this](std::string_view term) { return sparse.idf(term); };
}

HybridRetriever Workspace::retriever(const PipelineConfig& config) const {
    return HybridRetriever(store, sparse, query_encoder, dense,
                           RetrievalSettings{config.k_sparse, config.k_dense,
                                             config.expansion_terms, config.bm25});
}

std::optional<PassageId> gold_passage_for(const Workspace& ws, const HybridRetriever& retriever,
                                          const WaferInstance& inst) {
    const auto ids = ws.store.passages_of(inst.cited_url);
    if (ids.empty()) return std::nullopt;
    const auto query = retriever.sparse_query(extract_claim_context(inst));
    std::optional<PassageId> best;
    double best_score = 0.0;
    for (auto id : ids) {
        const double s = bm25_score(ws.sparse, query, id);
        if (!best || s > best_score) {
            best = id;
            best_score = s;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

FeatureHashEncoder fresh_encoder(const PipelineConfig& config, const PassageStore& store,
                                 std::uint64_t salt) {
    EncoderConfig ec = config.encoder;
    ec.seed = config.seed + salt;
    FeatureHashEncoder enc(ec);
    enc.fit_idf(store.passages());
    return enc;
}

bool has_claim(const WaferInstance& inst) {
    try {
        extract_claim_context(inst);
        return true;
    } catch (const NoClaim&) {
        return false;
    }
}

const Document& document_or(const PassageStore& store, const WaferInstance& inst,
                            Document& fallback) {
    if (const auto* doc = store.find_document(inst.cited_url)) return *doc;
    fallback = Document{inst.cited_url, inst.cited_title, "", nlohmann::json::object()};
    return fallback;
}

}  // namespace

Workspace build_workspace(const PipelineConfig& config, std::vector<Document> documents,
                          std::vector<WaferInstance> instances) {
    Workspace ws;
    ws.store = PassageStore(std::move(documents), config.window_words, config.stride_words);
    ws.instances = std::move(instances);
    ws.splits = split_by_article(ws.instances, config.split_ratios, config.seed);
    ws.sparse = InvertedIndex::build(ws.store.passages());
    ws.query_encoder = fresh_encoder(config, ws.store, 0);
    ws.passage_encoder = config.shared_encoder ? ws.query_encoder : fresh_encoder(config, ws.store, 1);
    ws.dense = build_vector_index(ws.passage_encoder, ws.store.passages());
    ws.scorer = CrossScorer::initial();
    return ws;
}

TrainReport train_workspace(const PipelineConfig& config, Workspace& ws) {
    TrainReport report;
    const SplitName train_split[] = {SplitName::Train};
    const auto train_set = ws.select(train_split);

    {
        const auto retriever = ws.retriever(config);
        std::vector<BiEncoderExample> examples;
        for (const auto& inst : train_set) {
            if (!has_claim(inst)) continue;
            const auto gold = gold_passage_for(ws, retriever, inst);
            if (!gold) continue;
            examples.push_back(BiEncoderExample{extract_claim_context(inst), ws.store.at(*gold)});
        }
        report.biencoder_examples = examples.size();
        if (config.shared_encoder) {
            ws.query_encoder = train_biencoder(std::move(ws.query_encoder), examples,
                                               config.biencoder, &report.biencoder_losses);
            ws.passage_encoder = ws.query_encoder;
        } else {
            train_biencoder(ws.query_encoder, ws.passage_encoder, examples, config.biencoder,
                            &report.biencoder_losses);
        }
        ws.dense = build_vector_index(ws.passage_encoder, ws.store.passages());
    }

    const auto retriever = ws.retriever(config);
    report.em = train_em(CrossScorer::initial(), train_set, retriever.as_candidate_retriever(),
                         ws.store, config.em, ws.idf());

    const std::unordered_set<std::string> skipped(report.em.skipped_ids.begin(),
                                                  report.em.skipped_ids.end());
    std::vector<double> reference;
    for (const auto& inst : train_set) {
        if (skipped.contains(inst.instance_id)) continue;
        const ClaimFeaturizer claim(extract_claim_context(inst), ws.idf());
        const auto ids = ws.store.passages_of(inst.cited_url);
        std::vector<PassageRef> refs;
        for (auto id : ids) refs.push_back(PassageRef{id, ws.store.at(id).text});
        reference.push_back(score_document(report.em.scorer, claim, inst.cited_url, refs).score);
    }
    ws.scorer = report.em.scorer;
    if (!reference.empty()) {
        const double before = ws.scorer.weights()[static_cast<std::size_t>(Feature::Bias)];
        ws.scorer = calibrate_bias(ws.scorer, reference, config.calibration_quantile,
                                   config.flag_threshold);
        report.bias_shift = ws.scorer.weights()[static_cast<std::size_t>(Feature::Bias)] - before;
    }
    return report;
}

VerifiedClaim verify_instance(const PipelineConfig& config, const Workspace& ws,
                              const HybridRetriever& retriever, const WaferInstance& inst) {
    VerifiedClaim out;
    out.instance = inst;
    out.context = extract_claim_context(inst);
    const ClaimFeaturizer claim(out.context, ws.idf());
    const auto r = retriever.retrieve(out.context);
    Document fallback;
    const auto& original = document_or(ws.store, inst, fallback);
    out.outcome = rerank(ws.scorer, claim, r.fused, original, ws.store, config.flag_threshold);
    return out;
}

nlohmann::json to_json(const VerifiedClaim& claim, const PassageStore& store,
                       std::size_t max_ranked) {
    auto passage_text = [&](const VerificationResult& r, bool is_original) -> nlohmann::json {
        if (is_original && store.passages_of(r.doc_url).empty()) return nullptr;
        return store.at(r.best_passage_id).text;
    };
    auto doc_json = [&](const VerificationResult& r, bool is_original) {
        return nlohmann::json{{"url", r.doc_url},
                              {"score", r.score},
                              {"flagged", r.flagged},
                              {"passage", passage_text(r, is_original)}};
    };

    nlohmann::json j;
    j["instance_id"] = claim.instance.instance_id;
    j["article_title"] = claim.context.article_title;
    j["section_path"] = claim.context.section_path;
    j["claim"] = claim.context.claim_sentence;
    const auto& orig = claim.outcome.ranked[claim.outcome.original_rank];
    j["original"] = doc_json(orig.result, true);
    j["original"]["rank"] = claim.outcome.original_rank + 1;
    j["ranked"] = nlohmann::json::array();
    for (std::size_t i = 0; i < claim.outcome.ranked.size() && i < max_ranked; ++i) {
        const auto& d = claim.outcome.ranked[i];
        j["ranked"].push_back({{"url", d.result.doc_url},
                               {"score", d.result.score},
                               {"is_original", d.is_original}});
    }
    j["recommendation"] =
        claim.outcome.recommendation ? doc_json(*claim.outcome.recommendation, false) : nullptr;
    return j;
}

MetricReport evaluate_workspace(const PipelineConfig& config, const Workspace& ws,
                                std::span<const SplitName> retrieval_splits) {
    MetricReport report;
    const auto retriever = ws.retriever(config);
    const auto eval_set = ws.select(retrieval_splits);

    std::vector<RankedResult> sparse_r, dense_r, fused_r, verifier_r;
    std::vector<ScoredCitation> verifier_c, prefix_c, depth_c;

    for (const auto& inst : eval_set) {
        if (!has_claim(inst)) continue;
        const auto ctx = extract_claim_context(inst);
        const ClaimFeaturizer claim(ctx, ws.idf());
        const auto r = retriever.retrieve(ctx);

        std::vector<ScoredPassage> fused_order;
        for (const auto& c : r.fused) fused_order.push_back(ScoredPassage{c.passage_id, 0.0});
        std::vector<std::string> verified;
        for (auto& d : score_candidates(ws.scorer, claim, r.fused, ws.store, config.flag_threshold)) {
            verified.push_back(std::move(d.doc_url));
        }
        sparse_r.push_back({inst.instance_id, inst.cited_url, rank_documents(r.sparse, ws.store)});
        dense_r.push_back({inst.instance_id, inst.cited_url, rank_documents(r.dense, ws.store)});
        fused_r.push_back({inst.instance_id, inst.cited_url, rank_documents(fused_order, ws.store)});
        verifier_r.push_back({inst.instance_id, inst.cited_url, std::move(verified)});
    }

    if (!sparse_r.empty()) {
        const std::string ks = std::to_string(config.k_sparse);
        const std::string kd = std::to_string(config.k_dense);
        const std::string kf = std::to_string(config.k_sparse + config.k_dense);
        report.metrics["retrieval.instances"] = static_cast<double>(sparse_r.size());
        report.metrics["sparse.p@1"] = precision_at_1(sparse_r);
        report.metrics["sparse.sr@" + ks] = success_rate_at_k(sparse_r, config.k_sparse);
        report.metrics["dense.p@1"] = precision_at_1(dense_r);
        report.metrics["dense.sr@" + kd] = success_rate_at_k(dense_r, config.k_dense);
        report.metrics["fused.sr@" + kf] =
            success_rate_at_k(fused_r, config.k_sparse + config.k_dense);
        report.metrics["verifier.p@1"] = precision_at_1(verifier_r);
        report.metrics["verifier.sr@10"] = success_rate_at_k(verifier_r, 10);
    }

    // Failed-verification ranking: featured citations vs failed citations.
    const SplitName fail_splits[] = {SplitName::FailDev, SplitName::FailTest};
    auto citations = ws.select(fail_splits);
    for (const auto& inst : eval_set) {
        if (inst.featured) citations.push_back(inst);
    }
    for (const auto& inst : citations) {
        if (!has_claim(inst)) continue;
        const ClaimFeaturizer claim(extract_claim_context(inst), ws.idf());
        Document fallback;
        const auto& doc = document_or(ws.store, inst, fallback);
        double passage_score = 0.0;
        if (const auto ids = ws.store.passages_of(inst.cited_url); !ids.empty()) {
            std::vector<PassageRef> refs;
            for (auto id : ids) refs.push_back(PassageRef{id, ws.store.at(id).text});
            passage_score = score_document(ws.scorer, claim, doc.url, refs).score;
        } else {
            passage_score = score_whole_document(ws.scorer, claim, doc, config.window_words,
                                                 config.stride_words)
                                .score;
        }
        const bool failed = inst.failed_verification;
        verifier_c.push_back({inst.instance_id, passage_score, failed});
        prefix_c.push_back({inst.instance_id,
                            score_document_prefix(ws.scorer, claim, doc, config.prefix_budget_words),
                            failed});
        depth_c.push_back({inst.instance_id, static_cast<double>(url_depth(inst.cited_url)), failed});
    }

    const auto has_both = [](const std::vector<ScoredCitation>& c) {
        const auto failed = std::count_if(c.begin(), c.end(), [](auto& x) { return x.is_failed; });
        return failed > 0 && static_cast<std::size_t>(failed) < c.size();
    };
    if (has_both(verifier_c)) {
        const std::pair<const char*, const std::vector<ScoredCitation>*> variants[] = {
            {"failed.verifier", &verifier_c},
            {"failed.prefix", &prefix_c},
            {"failed.url_depth", &depth_c},
        };
        for (const auto& [name, scored] : variants) {
            auto curve = pr_curve_failed(*scored);
            for (double r : {0.15, 0.5, 1.0}) {
                char key[64];
                std::snprintf(key, sizeof key, "%s.precision@recall%.2f", name, r);
                report.metrics[key] = precision_at_recall(curve, r).value_or(0.0);
            }
            report.curves[name] = std::move(curve);
        }
        report.metrics["failed.citations"] = static_cast<double>(verifier_c.size());
    }
    return report;
}

MetricReport evaluate_rankings(std::span<const RankedResult> results) {
    MetricReport report;
    report.metrics["instances"] = static_cast<double>(results.size());
    report.metrics["p@1"] = precision_at_1(results);
    for (std::size_t k : {1, 10, 100, 200}) {
        report.metrics["sr@" + std::to_string(k)] = success_rate_at_k(results, k);
    }
    return report;
}

RankedResult ranked_result_from_json(const nlohmann::json& j) {
    RankedResult r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.gold_url = j.at("gold_url").get<std::string>();
    r.ranked_urls = j.at("ranked_urls").get<std::vector<std::string>>();
    std::unordered_set<std::string> seen;
    for (const auto& u : r.ranked_urls) {
        if (!seen.insert(u).second) throw std::invalid_argument("ranked_urls repeats '" + u + "'");
    }
    return r;
}

// ---------------------------------------------------------------------------
// On-disk stages

nlohmann::json splits_to_json(std::span<const DatasetSplit> splits) {
    nlohmann::json j;
    j["format"] = "citeverify-splits/1";
    j["splits"] = nlohmann::json::object();
    for (const auto& s : splits) {
        j["splits"][std::string(to_string(s.name))] =
            std::vector<std::string>(s.instance_ids.begin(), s.instance_ids.end());
    }
    return j;
}

std::vector<DatasetSplit> splits_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "citeverify-splits/1") {
        throw ParseError("<splits>", 0, "missing format tag 'citeverify-splits/1'");
    }
    std::vector<DatasetSplit> out;
    for (const auto& [name, ids] : j.at("splits").items()) {
        const auto sn = split_from_string(name);
        if (!sn) throw ParseError("<splits>", 0, "unknown split '" + name + "'");
        out.push_back(DatasetSplit{*sn, ids.get<std::set<std::string>>()});
    }
    std::sort(out.begin(), out.end(),
              [](const DatasetSplit& a, const DatasetSplit& b) { return a.name < b.name; });
    return out;
}

namespace {

void require_file(const std::filesystem::path& p, const std::string& what) {
    if (!std::filesystem::exists(p)) {
        throw IoError(what + " '" + p.string() + "' does not exist");
    }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + p.string() + "' failed");
}

void save_encoders_and_dense(const PipelineConfig& config, const Workspace& ws) {
    ws.query_encoder.save(config.query_encoder_path());
    ws.passage_encoder.save(config.passage_encoder_path());
    ws.dense.save(config.dense_index_path());
}

Workspace load_inputs(const PipelineConfig& config) {
    require_file(config.documents, "documents file");
    require_file(config.instances, "instances file");
    Workspace ws;
    ws.store = PassageStore(read_jsonl<Document>(config.documents), config.window_words,
                            config.stride_words);
    ws.instances = read_jsonl<WaferInstance>(config.instances);
    return ws;
}

void load_indexes(const PipelineConfig& config, Workspace& ws) {
    for (const auto& [p, what] : {std::pair{config.splits_path(), "splits file"},
                                  std::pair{config.sparse_index_path(), "sparse index"},
                                  std::pair{config.query_encoder_path(), "query encoder"},
                                  std::pair{config.passage_encoder_path(), "passage encoder"},
                                  std::pair{config.dense_index_path(), "dense index"}}) {
        require_file(p, what);
    }
    std::ifstream splits_in(config.splits_path());
    try {
        ws.splits = splits_from_json(nlohmann::json::parse(splits_in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(config.splits_path().string(), 0, e.what());
    }
    ws.sparse = InvertedIndex::load(config.sparse_index_path());
    ws.query_encoder = FeatureHashEncoder::load(config.query_encoder_path());
    ws.passage_encoder = FeatureHashEncoder::load(config.passage_encoder_path());
    ws.dense = VectorIndex::load(config.dense_index_path());
    if (ws.sparse.passage_count() != ws.store.size() || ws.dense.size() != ws.store.size()) {
        throw IoError("indexes under '" + config.artifacts_dir.string() +
                      "' do not match the document collection; rerun build-index");
    }
}

}  // namespace

void build_index(const PipelineConfig& config) {
    auto inputs = load_inputs(config);
    std::vector<Document> docs(inputs.store.documents().begin(), inputs.store.documents().end());
    const auto ws = build_workspace(config, std::move(docs), std::move(inputs.instances));
    std::filesystem::create_directories(config.artifacts_dir);
    write_text(config.splits_path(), splits_to_json(ws.splits).dump(1) + "\n");
    ws.sparse.save(config.sparse_index_path());
    save_encoders_and_dense(config, ws);
}

TrainReport train(const PipelineConfig& config) {
    auto ws = load_inputs(config);
    load_indexes(config, ws);
    auto report = train_workspace(config, ws);
    save_encoders_and_dense(config, ws);
    ws.scorer.save(config.scorer_path());
    return report;
}

Workspace load_workspace(const PipelineConfig& config) {
    auto ws = load_inputs(config);
    load_indexes(config, ws);
    require_file(config.scorer_path(), "scorer checkpoint");
    ws.scorer = CrossScorer::load(config.scorer_path());
    return ws;
}

}  // namespace citeverify
