#include "citeverify/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <numeric>

#include <httplib.h>

#include "citeverify/errors.hpp"
#include "citeverify/evaluation.hpp"
#include "citeverify/pipeline.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

// ---------------------------------------------------------------------------
// Review items

namespace {

CitationView view_of(const CrossScorer& scorer, const ClaimFeaturizer& claim,
                     const PassageStore& store, const std::string& url, const std::string& title,
                     double score) {
    CitationView v;
    v.url = url;
    v.title = title;
    v.score = score;
    if (const auto* doc = store.find_document(url)) {
        v.title = doc->title.empty() ? title : doc->title;
        v.full_text = doc->text;
        if (!split_words(doc->text).empty()) {
            v.passage = select_annotation_passage(scorer, claim, *doc, store.window_words()).text;
        }
    }
    return v;
}

}  // namespace

std::vector<ReviewItem> build_review_items(const PipelineConfig& config, const Workspace& ws,
                                           std::span<const WaferInstance> instances) {
    const auto retriever = ws.retriever(config);
    std::vector<ReviewItem> items;
    for (const auto& inst : instances) {
        VerifiedClaim v;
        try {
            v = verify_instance(config, ws, retriever, inst);
        } catch (const NoClaim&) {
            continue;
        }
        const RankedDocument* suggestion = nullptr;
        for (const auto& d : v.outcome.ranked) {
            if (!d.is_original) {
                suggestion = &d;
                break;
            }
        }
        if (!suggestion) continue;
        const auto& orig = v.outcome.ranked[v.outcome.original_rank].result;
        const ClaimFeaturizer claim(v.context, ws.idf());

        ReviewItem item;
        item.instance_id = inst.instance_id;
        item.context = v.context;
        item.context_text = inst.context_with_marker;
        item.original = view_of(ws.scorer, claim, ws.store, inst.cited_url, inst.cited_title,
                                orig.score);
        const auto* sdoc = ws.store.find_document(suggestion->result.doc_url);
        item.suggested = view_of(ws.scorer, claim, ws.store, suggestion->result.doc_url,
                                 sdoc ? sdoc->title : std::string(), suggestion->result.score);
        item.flagged = orig.flagged;
        items.push_back(std::move(item));
    }
    return items;
}

// ---------------------------------------------------------------------------
// Annotation records

std::string_view to_string(Preference p) {
    switch (p) {
        case Preference::A: return "A";
        case Preference::B: return "B";
        case Preference::None: return "none";
    }
    return "none";
}

std::string_view to_string(EvidenceLevel e) {
    switch (e) {
        case EvidenceLevel::Enough: return "enough";
        case EvidenceLevel::Partial: return "partial";
        case EvidenceLevel::NoEvidence: return "no_evidence";
    }
    return "no_evidence";
}

std::optional<Preference> preference_from_string(std::string_view s) {
    if (s == "A") return Preference::A;
    if (s == "B") return Preference::B;
    if (s == "none") return Preference::None;
    return std::nullopt;
}

std::optional<EvidenceLevel> evidence_level_from_string(std::string_view s) {
    if (s == "enough") return EvidenceLevel::Enough;
    if (s == "partial") return EvidenceLevel::Partial;
    if (s == "no_evidence") return EvidenceLevel::NoEvidence;
    return std::nullopt;
}

nlohmann::json to_json(const AnnotationRecord& r) {
    nlohmann::json j = {{"item_id", r.item_id},
                        {"annotator_id", r.annotator_id},
                        {"preference", to_string(r.preference)}};
    if (!r.evidence_level.empty()) {
        auto& ev = j["evidence_level"] = nlohmann::json::object();
        for (const auto& [pane, level] : r.evidence_level) {
            ev[pane == Pane::A ? "A" : "B"] = to_string(level);
        }
    }
    return j;
}

namespace {

// Parses the client-supplied part of a record: annotator, preference and
// evidence levels.
void read_annotation_fields(const nlohmann::json& j, AnnotationRecord& r) {
    if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "item_id" && key != "annotator_id" && key != "preference" &&
            key != "evidence_level") {
            throw std::invalid_argument("unknown field '" + key + "'");
        }
    }
    const auto annotator = j.find("annotator_id");
    if (annotator == j.end() || !annotator->is_string() || annotator->get<std::string>().empty()) {
        throw std::invalid_argument("field 'annotator_id' must be a non-empty string");
    }
    r.annotator_id = annotator->get<std::string>();

    const auto pref = j.find("preference");
    if (pref == j.end() || !pref->is_string()) {
        throw std::invalid_argument("field 'preference' must be one of A, B, none");
    }
    const auto p = preference_from_string(pref->get<std::string>());
    if (!p) throw std::invalid_argument("field 'preference' must be one of A, B, none");
    r.preference = *p;

    if (const auto ev = j.find("evidence_level"); ev != j.end() && !ev->is_null()) {
        if (!ev->is_object()) {
            throw std::invalid_argument("field 'evidence_level' must be an object keyed by pane");
        }
        for (const auto& [pane, level] : ev->items()) {
            if (pane != "A" && pane != "B") {
                throw std::invalid_argument("field 'evidence_level' has unknown pane '" + pane + "'");
            }
            const auto l = level.is_string() ? evidence_level_from_string(level.get<std::string>())
                                             : std::nullopt;
            if (!l) {
                throw std::invalid_argument(
                    "field 'evidence_level' values must be enough, partial or no_evidence");
            }
            r.evidence_level[pane == "A" ? Pane::A : Pane::B] = *l;
        }
    }
}

}  // namespace

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
    AnnotationRecord r;
    read_annotation_fields(j, r);
    const auto item = j.find("item_id");
    if (item == j.end() || !item->is_string() || item->get<std::string>().empty()) {
        throw std::invalid_argument("field 'item_id' must be a non-empty string");
    }
    r.item_id = item->get<std::string>();
    return r;
}

// ---------------------------------------------------------------------------
// AnnotationStore

namespace {

constexpr std::string_view kAnnotationFormat = "citeverify-annotations/1";

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        const auto n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write to '" + path.string() + "' failed: " + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        throw IoError("fsync of '" + path.string() + "' failed: " + std::strerror(errno));
    }
}

}  // namespace

AnnotationStore::AnnotationStore(std::filesystem::path path, std::uint64_t seed)
    : path_(std::move(path)), seed_(seed) {
    bool have_header = false;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        if (!in) throw IoError("cannot open '" + path_.string() + "' for reading");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(path_.string(), lineno, e.what());
            }
            if (!have_header) {
                if (!j.is_object() || j.value("format", "") != kAnnotationFormat ||
                    !j.contains("seed") || !j["seed"].is_number_unsigned()) {
                    throw ParseError(path_.string(), lineno,
                                     "missing '" + std::string(kAnnotationFormat) + "' header");
                }
                if (j["seed"].get<std::uint64_t>() != seed_) {
                    throw ConfigError(path_.string() + ": annotations were recorded with seed " +
                                      std::to_string(j["seed"].get<std::uint64_t>()) +
                                      ", server seed is " + std::to_string(seed_));
                }
                have_header = true;
                continue;
            }
            AnnotationRecord r;
            try {
                r = annotation_from_json(j);
            } catch (const std::invalid_argument& e) {
                throw ParseError(path_.string(), lineno, e.what());
            }
            if (keys_.emplace(r.item_id, r.annotator_id).second) records_.push_back(std::move(r));
        }
    }

    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw IoError("cannot open '" + path_.string() + "' for appending: " + std::strerror(errno));
    }
    if (!have_header) {
        const nlohmann::json header = {{"format", kAnnotationFormat}, {"seed", seed_}};
        write_all(fd_, header.dump() + "\n", path_);
    }
}

AnnotationStore::~AnnotationStore() {
    if (fd_ >= 0) ::close(fd_);
}

bool AnnotationStore::append(const AnnotationRecord& record) {
    if (keys_.contains({record.item_id, record.annotator_id})) return false;
    write_all(fd_, to_json(record).dump() + "\n", path_);
    keys_.emplace(record.item_id, record.annotator_id);
    records_.push_back(record);
    return true;
}

// ---------------------------------------------------------------------------
// ReviewService

ReviewService::ReviewService(std::vector<ReviewItem> items, AnnotationStore& store,
                             ServiceOptions options)
    : items_(std::move(items)), store_(store), options_(std::move(options)) {
    std::stable_sort(items_.begin(), items_.end(), [](const ReviewItem& a, const ReviewItem& b) {
        if (a.original.score != b.original.score) return a.original.score < b.original.score;
        return a.instance_id < b.instance_id;
    });
    if (options_.queue_limit > 0 && items_.size() > options_.queue_limit) {
        items_.resize(options_.queue_limit);
    }
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!index_.emplace(items_[i].instance_id, i).second) {
            throw std::invalid_argument("duplicate review item '" + items_[i].instance_id + "'");
        }
    }
}

Pane ReviewService::original_pane(const std::string& instance_id) const {
    return (stable_hash(instance_id, options_.seed) & 1) ? Pane::B : Pane::A;
}

const ReviewItem* ReviewService::find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

namespace {

nlohmann::json error_body(const std::string& message) { return {{"error", message}}; }

}  // namespace

ReviewService::Response ReviewService::queue() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : store_.records()) ++counts[r.item_id];
    auto out = nlohmann::json::array();
    for (const auto& item : items_) {
        const auto c = counts.find(item.instance_id);
        out.push_back({{"instance_id", item.instance_id},
                       {"claim", item.context.claim_sentence},
                       {"article_title", item.context.article_title},
                       {"score", item.original.score},
                       {"flagged", item.flagged},
                       {"annotations", c == counts.end() ? 0 : c->second}});
    }
    return {200, out};
}

ReviewService::Response ReviewService::claim(const std::string& instance_id) const {
    const auto* item = find(instance_id);
    if (!item) return {404, error_body("unknown claim '" + instance_id + "'")};
    auto pane = [](const CitationView& v) {
        return nlohmann::json{{"title", v.title}, {"passage", v.passage}, {"full_text", v.full_text}};
    };
    const bool original_on_a = original_pane(instance_id) == Pane::A;
    nlohmann::json j;
    j["instance_id"] = item->instance_id;
    j["article_title"] = item->context.article_title;
    j["section_path"] = item->context.section_path;
    j["claim"] = item->context.claim_sentence;
    j["context"] = item->context_text;
    j["panes"] = {{"A", pane(original_on_a ? item->original : item->suggested)},
                  {"B", pane(original_on_a ? item->suggested : item->original)}};
    return {200, j};
}

ReviewService::Response ReviewService::annotate(const std::string& instance_id,
                                                const std::string& body) {
    if (!find(instance_id)) return {404, error_body("unknown claim '" + instance_id + "'")};
    AnnotationRecord r;
    try {
        const auto j = nlohmann::json::parse(body);
        read_annotation_fields(j, r);
        if (j.contains("item_id") && j["item_id"] != instance_id) {
            throw std::invalid_argument("field 'item_id' does not match the claim in the path");
        }
    } catch (const nlohmann::json::exception& e) {
        return {422, error_body(std::string("invalid JSON: ") + e.what())};
    } catch (const std::invalid_argument& e) {
        return {422, error_body(e.what())};
    }
    r.item_id = instance_id;

    std::unique_lock lock(mutex_);
    if (!store_.append(r)) {
        return {409, error_body("annotator '" + r.annotator_id + "' already annotated '" +
                                instance_id + "'")};
    }
    return {201, to_json(r)};
}

ReviewService::Response ReviewService::stats() const {
    std::shared_lock lock(mutex_);
    enum Side { Existing, Suggested, Neither };
    static constexpr const char* kSideNames[] = {"existing", "suggested", "none"};

    std::map<std::string, std::vector<AnnotationRecord>> by_item;
    for (const auto& r : store_.records()) {
        if (find(r.item_id)) by_item[r.item_id].push_back(r);
    }

    auto side_of = [&](const AnnotationRecord& r) {
        if (r.preference == Preference::None) return Neither;
        const Pane chosen = r.preference == Preference::A ? Pane::A : Pane::B;
        return chosen == original_pane(r.item_id) ? Existing : Suggested;
    };
    auto shares = [&](const std::vector<const AnnotationRecord*>& recs) -> nlohmann::json {
        if (recs.empty()) return nullptr;
        double counts[3] = {0, 0, 0};
        for (const auto* r : recs) counts[side_of(*r)] += 1.0;
        nlohmann::json j;
        for (int s = 0; s < 3; ++s) j[kSideNames[s]] = counts[s] / static_cast<double>(recs.size());
        return j;
    };

    nlohmann::json out;
    std::vector<const AnnotationRecord*> all;
    std::size_t wins_existing = 0, wins_suggested = 0;
    std::map<std::string, std::map<std::string, std::size_t>> evidence;
    for (const auto& [id, recs] : by_item) {
        for (const auto& r : recs) {
            all.push_back(&r);
            const auto side = side_of(r);
            wins_existing += side == Existing ? 1 : 0;
            wins_suggested += side == Suggested ? 1 : 0;
            for (const auto& [pane, level] : r.evidence_level) {
                const bool is_original = pane == original_pane(id);
                ++evidence[is_original ? "existing" : "suggested"][std::string(to_string(level))];
            }
        }
    }
    out["annotations"] = all.size();
    out["claims_annotated"] = by_item.size();
    out["preference_shares"] = shares(all);

    // Per-claim majority, in the pane labels annotators saw and unblinded.
    std::map<std::string, std::size_t> majority_counts = {
        {"existing", 0}, {"suggested", 0}, {"none", 0}, {"no_majority", 0}};
    auto per_claim = nlohmann::json::array();
    std::vector<std::vector<std::size_t>> kappa_rows;
    bool kappa_defined = true;
    for (const auto& [id, recs] : by_item) {
        std::vector<Preference> labels;
        std::vector<std::size_t> row(3, 0);
        for (const auto& r : recs) {
            labels.push_back(r.preference);
            ++row[static_cast<std::size_t>(r.preference)];
        }
        const auto winner = majority_vote<Preference>(labels);
        std::string unblinded = "no_majority";
        if (winner) {
            AnnotationRecord probe{id, "", *winner, {}};
            unblinded = kSideNames[side_of(probe)];
        }
        ++majority_counts[unblinded];
        per_claim.push_back({{"instance_id", id},
                             {"annotations", recs.size()},
                             {"majority", winner ? std::string(to_string(*winner)) : "no_majority"}});
        if (recs.size() >= 2) {
            if (!kappa_rows.empty() && recs.size() != std::accumulate(kappa_rows[0].begin(),
                                                                       kappa_rows[0].end(),
                                                                       std::size_t{0})) {
                kappa_defined = false;
            }
            kappa_rows.push_back(std::move(row));
        }
    }
    out["majority"] = majority_counts;
    out["per_claim"] = per_claim;

    out["fleiss_kappa"] = nullptr;
    if (kappa_defined && !kappa_rows.empty()) {
        try {
            out["fleiss_kappa"] = fleiss_kappa(kappa_rows);
        } catch (const DegenerateAgreement&) {
        }
    }

    out["sign_test"] = nullptr;
    if (wins_existing + wins_suggested > 0) {
        const auto t = sign_test(wins_suggested, wins_existing);
        out["sign_test"] = {{"suggested_wins", wins_suggested},
                            {"existing_wins", wins_existing},
                            {"one_tail", t.one_tail},
                            {"two_tail", t.two_tail}};
    }

    std::vector<ScoredItem> scored;
    for (const auto& item : items_) scored.push_back({item.instance_id, item.original.score});
    auto buckets = nlohmann::json::array();
    for (const auto& b : bucket_by_score(scored, options_.bucket_edges)) {
        std::vector<const AnnotationRecord*> recs;
        for (const auto& id : b.ids) {
            if (const auto it = by_item.find(id); it != by_item.end()) {
                for (const auto& r : it->second) recs.push_back(&r);
            }
        }
        buckets.push_back({{"lower", b.lower ? nlohmann::json(*b.lower) : nlohmann::json()},
                           {"upper", b.upper ? nlohmann::json(*b.upper) : nlohmann::json()},
                           {"claims", b.ids.size()},
                           {"annotations", recs.size()},
                           {"preference_shares", shares(recs)}});
    }
    out["buckets"] = buckets;

    auto ev = nlohmann::json::object();
    for (const char* side : {"existing", "suggested"}) {
        auto& e = ev[side] = nlohmann::json::object();
        for (auto level : {EvidenceLevel::Enough, EvidenceLevel::Partial, EvidenceLevel::NoEvidence}) {
            const std::string name(to_string(level));
            e[name] = evidence[side][name];
        }
    }
    out["evidence_levels"] = ev;
    return {200, out};
}

// ---------------------------------------------------------------------------
// HttpServer

struct HttpServer::Impl {
    explicit Impl(ReviewService& s) : service(s) {}

    ReviewService& service;
    httplib::Server server;
};

HttpServer::HttpServer(ReviewService& service)
    : impl_(std::make_unique<Impl>(service)) {
    auto reply = [](httplib::Response& res, const ReviewService::Response& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto& svc = impl_->service;
    auto& srv = impl_->server;
    srv.Get("/queue", [&svc, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, svc.queue());
    });
    srv.Get(R"(/claims/([^/]+))", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.claim(req.matches[1]));
    });
    srv.Post(R"(/claims/([^/]+)/annotations)",
             [&svc, reply](const httplib::Request& req, httplib::Response& res) {
                 reply(res, svc.annotate(req.matches[1], req.body));
             });
    srv.Get("/stats", [&svc, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, svc.stats());
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                 std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(nlohmann::json{{"error", what}}.dump(), "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace citeverify
