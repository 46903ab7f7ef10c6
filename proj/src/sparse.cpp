#include "citeverify/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "binio.hpp"
#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

namespace {

constexpr std::string_view kIndexMagic = "CVBM25IX";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

std::vector<std::pair<std::string, std::uint32_t>> weighted_terms(const SparseQuery& query) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : query.terms) ++counts[t];
    return {counts.begin(), counts.end()};
}

double bm25_idf(std::size_t n_passages, std::size_t df) {
    const double n = static_cast<double>(n_passages);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_weight(double idf, double tf, double passage_len, double avgdl,
                        const Bm25Params& params) {
    const double norm = avgdl > 0.0 ? passage_len / avgdl : 1.0;
    return idf * (tf * (params.k1 + 1.0)) /
           (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

InvertedIndex InvertedIndex::build(std::span<const Passage> passages) {
    std::vector<std::string> texts;
    texts.reserve(passages.size());
    for (const auto& p : passages) texts.push_back(p.text);
    return build_from_texts(texts);
}

InvertedIndex InvertedIndex::build_from_texts(std::span<const std::string> texts) {
    if (texts.empty()) throw EmptyCorpus("cannot build an index over zero passages");

    std::map<std::string, std::vector<Posting>> postings;
    InvertedIndex index;
    index.doc_len_.reserve(texts.size());
    std::uint64_t total = 0;
    for (std::size_t pid = 0; pid < texts.size(); ++pid) {
        auto tokens = tokenize(texts[pid]);
        index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
        std::sort(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
            postings[tokens[i]].push_back(
                Posting{static_cast<PassageId>(pid), static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    index.avgdl_ = static_cast<double>(total) / static_cast<double>(texts.size());
    index.terms_.reserve(postings.size());
    index.postings_.reserve(postings.size());
    for (auto& [term, list] : postings) {
        index.terms_.push_back(term);
        index.postings_.push_back(std::move(list));
    }
    index.rebuild_lookup();
    return index;
}

void InvertedIndex::rebuild_lookup() {
    term_ids_.clear();
    term_ids_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        term_ids_.emplace(terms_[i], static_cast<std::uint32_t>(i));
    }
}

std::uint32_t InvertedIndex::doc_len(PassageId id) const {
    if (id >= doc_len_.size()) {
        throw UnknownPassage("passage id " + std::to_string(id) + " not in index");
    }
    return doc_len_[id];
}

std::span<const InvertedIndex::Posting> InvertedIndex::postings(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return {};
    return postings_[it->second];
}

std::size_t InvertedIndex::df(std::string_view term) const { return postings(term).size(); }

void InvertedIndex::save(std::ostream& out) const {
    out.write(kIndexMagic.data(), kIndexMagic.size());
    binio::put_u32(out, kIndexVersion);
    binio::put_u64(out, doc_len_.size());
    binio::put_f64(out, avgdl_);
    for (auto len : doc_len_) binio::put_u32(out, len);
    binio::put_u64(out, terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        binio::put_str(out, terms_[t]);
        binio::put_u64(out, postings_[t].size());
        for (const auto& p : postings_[t]) {
            binio::put_u32(out, p.passage_id);
            binio::put_u32(out, p.tf);
        }
    }
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save(out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

InvertedIndex InvertedIndex::load(std::istream& in, const std::string& source_name) {
    binio::Reader r(in, source_name);
    r.expect_magic(kIndexMagic);
    if (const auto v = r.u32(); v != kIndexVersion) {
        r.fail("unsupported index version " + std::to_string(v));
    }
    InvertedIndex index;
    const auto n = r.u64();
    index.avgdl_ = r.f64();
    index.doc_len_.resize(n);
    for (auto& len : index.doc_len_) len = r.u32();
    const auto n_terms = r.u64();
    index.terms_.reserve(n_terms);
    index.postings_.reserve(n_terms);
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        index.terms_.push_back(r.str());
        std::vector<Posting> list(r.u64());
        for (auto& p : list) {
            p.passage_id = r.u32();
            p.tf = r.u32();
            if (p.passage_id >= n) r.fail("posting references passage beyond corpus");
        }
        index.postings_.push_back(std::move(list));
    }
    index.rebuild_lookup();
    return index;
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return load(in, path.string());
}

double bm25_score(const InvertedIndex& index, const SparseQuery& query, PassageId passage_id,
                  const Bm25Params& params) {
    const double len = index.doc_len(passage_id);
    double score = 0.0;
    for (const auto& [term, qtf] : weighted_terms(query)) {
        const auto list = index.postings(term);
        const auto it = std::lower_bound(
            list.begin(), list.end(), passage_id,
            [](const InvertedIndex::Posting& p, PassageId id) { return p.passage_id < id; });
        if (it == list.end() || it->passage_id != passage_id) continue;
        const double idf = bm25_idf(index.passage_count(), list.size());
        score += qtf * bm25_term_weight(idf, it->tf, len, index.avgdl(), params);
    }
    return score;
}

std::vector<ScoredPassage> search(const InvertedIndex& index, const SparseQuery& query,
                                  std::size_t k, const Bm25Params& params) {
    if (k == 0) throw std::invalid_argument("search requires k >= 1");
    std::vector<double> acc(index.passage_count(), 0.0);
    std::vector<PassageId> touched;
    for (const auto& [term, qtf] : weighted_terms(query)) {
        const auto list = index.postings(term);
        if (list.empty()) continue;
        const double idf = bm25_idf(index.passage_count(), list.size());
        for (const auto& p : list) {
            if (acc[p.passage_id] == 0.0) touched.push_back(p.passage_id);
            acc[p.passage_id] +=
                qtf * bm25_term_weight(idf, p.tf, index.doc_len(p.passage_id), index.avgdl(),
                                       params);
        }
    }

    std::vector<ScoredPassage> hits;
    hits.reserve(touched.size());
    for (auto pid : touched) {
        if (acc[pid] > 0.0) hits.push_back(ScoredPassage{pid, acc[pid]});
    }
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      ranks_before);
    hits.resize(keep);
    return hits;
}

SparseQuery build_query(const ClaimContext& ctx, std::span<const std::string> expansion) {
    SparseQuery q;
    q.terms = tokenize(ctx.article_title);
    for (auto& t : tokenize(ctx.claim_sentence)) q.terms.push_back(std::move(t));
    q.terms.insert(q.terms.end(), expansion.begin(), expansion.end());
    return q;
}

std::vector<std::string> expand_query(const ClaimContext& ctx, std::size_t m,
                                      const InvertedIndex& background) {
    if (m == 0) return {};
    std::map<std::string, std::uint32_t> tf;
    for (auto& t : tokenize(ctx.preceding_text)) ++tf[t];
    for (auto& t : tokenize(ctx.section_path)) ++tf[t];

    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(tf.size());
    for (const auto& [term, count] : tf) ranked.emplace_back(term, count * background.idf(term));
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < m; ++i) out.push_back(ranked[i].first);
    return out;
}

}  // namespace citeverify
