#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "citeverify/errors.hpp"
#include "citeverify/evaluation.hpp"
#include "citeverify/service.hpp"
#include "support.hpp"

using namespace citeverify;
using nlohmann::json;

namespace {

ReviewItem item(std::string id, double score, double threshold = 0.0) {
    ReviewItem it;
    it.instance_id = id;
    it.context.article_title = "Article " + id;
    it.context.section_path = "Section";
    it.context.claim_sentence = "Claim of " + id + ".";
    it.context_text = "Before. Claim of " + id + ". [CIT]";
    it.original = CitationView{"https://orig.example/" + id, "Original title", "original passage",
                               "original passage and more", score};
    it.suggested = CitationView{"https://sugg.example/" + id, "Suggested title", "suggested passage",
                                "suggested passage and more", score + 1.0};
    it.flagged = score < threshold;
    return it;
}

std::vector<ReviewItem> items() {
    return {item("c1", 0.5), item("c2", -3.0), item("c3", 2.0), item("c4", -0.5), item("c5", 1.0)};
}

// A service on an ephemeral port with its own annotation log.
struct Server {
    Server(const std::filesystem::path& log, std::uint64_t seed)
        : store(log, seed),
          service(items(), store, ServiceOptions{seed, 0, {0.0}}),
          http(service) {
        port = http.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }
    ~Server() {
        http.stop();
        thread.join();
    }

    std::pair<int, json> get(const std::string& path) {
        auto res = client->Get(path);
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }
    std::pair<int, json> post(const std::string& path, const std::string& body) {
        auto res = client->Post(path, body, "application/json");
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }
    std::pair<int, json> annotate(const std::string& id, const std::string& annotator,
                                  const std::string& pref) {
        return post("/claims/" + id + "/annotations",
                    json{{"annotator_id", annotator}, {"preference", pref}}.dump());
    }

    AnnotationStore store;
    ReviewService service;
    HttpServer http;
    int port = 0;
    std::thread thread;
    std::unique_ptr<httplib::Client> client;
};

void collect_strings(const json& j, std::vector<std::string>& keys, std::vector<std::string>& values) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            keys.push_back(k);
            collect_strings(v, keys, values);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_strings(v, keys, values);
    } else if (j.is_string()) {
        values.push_back(j.get<std::string>());
    }
}

}  // namespace

TEST_CASE("queue is ascending by original score") {
    testsupport::TempDir dir;
    Server s(dir / "ann.jsonl", 7);
    auto [status, q] = s.get("/queue");
    CHECK(status == 200);
    REQUIRE(q.size() == 5);
    std::vector<std::string> ids;
    for (const auto& e : q) ids.push_back(e["instance_id"]);
    CHECK(ids == std::vector<std::string>{"c2", "c4", "c1", "c5", "c3"});
    for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i - 1]["score"] <= q[i]["score"]);
    CHECK(q[0]["score"] == -3.0);
    CHECK(q[0]["flagged"] == true);
    CHECK(q[2]["flagged"] == false);
    CHECK(q[0]["annotations"] == 0);
    CHECK(q[0]["claim"] == "Claim of c2.");
}

TEST_CASE("claims are blind and stable") {
    testsupport::TempDir dir;
    Server s(dir / "ann.jsonl", 7);
    int a_original = 0;
    for (const auto& it : items()) {
        auto [status, c] = s.get("/claims/" + it.instance_id);
        CHECK(status == 200);
        std::vector<std::string> keys, values;
        collect_strings(c, keys, values);
        for (const auto& k : keys) {
            for (const char* banned : {"url", "score", "original", "suggested", "is_original", "flagged",
                                       "source", "rank"}) {
                CHECK(k != banned);
            }
        }
        for (const auto& v : values) CHECK(v.find("https://") == std::string::npos);
        CHECK(c["panes"]["A"].contains("passage"));
        CHECK(c["panes"]["B"].contains("full_text"));

        const bool original_on_a = c["panes"]["A"]["passage"] == "original passage";
        CHECK(original_on_a == (s.service.original_pane(it.instance_id) == Pane::A));
        a_original += original_on_a ? 1 : 0;
        CHECK(s.get("/claims/" + it.instance_id).second == c);
    }
    CHECK(s.get("/claims/nope").first == 404);

    // The assignment depends on the seed.
    AnnotationStore other_store(dir / "other.jsonl", 8);
    ReviewService other(items(), other_store, ServiceOptions{8, 0, {0.0}});
    int differs = 0;
    for (int i = 0; i < 64; ++i) {
        const auto id = "claim-" + std::to_string(i);
        differs += s.service.original_pane(id) != other.original_pane(id) ? 1 : 0;
    }
    CHECK(differs > 0);
    CHECK(differs < 64);
}

TEST_CASE("annotation POST contract") {
    testsupport::TempDir dir;
    Server s(dir / "ann.jsonl", 7);

    auto [st, body] = s.annotate("c1", "u1", "A");
    CHECK(st == 201);
    CHECK(body["item_id"] == "c1");
    CHECK(s.annotate("c1", "u1", "A").first == 409);
    CHECK(s.annotate("c1", "u1", "B").first == 409);
    CHECK(s.annotate("c1", "u2", "none").first == 201);
    CHECK(s.annotate("missing", "u1", "A").first == 404);

    const std::string path = "/claims/c2/annotations";
    CHECK(s.post(path, "not json").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1"})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"C"})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"","preference":"A"})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"A","extra":1})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"A","item_id":"c3"})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"A","evidence_level":{"C":"enough"}})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"A","evidence_level":{"A":"lots"}})").first == 422);
    CHECK(s.post(path, R"({"annotator_id":"u1","preference":"B","item_id":"c2",
                           "evidence_level":{"A":"partial","B":"enough"}})")
              .first == 201);

    auto [qs, q] = s.get("/queue");
    for (const auto& e : q) {
        if (e["instance_id"] == "c1") CHECK(e["annotations"] == 2);
        if (e["instance_id"] == "c2") CHECK(e["annotations"] == 1);
    }
    CHECK(s.store.records().size() == 3);
}

TEST_CASE("stats: majority, kappa, sign test and restart stability") {
    testsupport::TempDir dir;
    const auto log = dir / "ann.jsonl";
    json before;
    {
        Server s(log, 7);
        const char* prefs[] = {"A", "A", "A", "B", "none"};
        for (int i = 0; i < 5; ++i) CHECK(s.annotate("c3", "u" + std::to_string(i), prefs[i]).first == 201);
        for (int i = 0; i < 5; ++i) CHECK(s.annotate("c2", "u" + std::to_string(i), i < 2 ? "A" : (i < 4 ? "B" : "none")).first == 201);
        CHECK(s.annotate("c1", "u0", "B").first == 201);

        auto [status, st] = s.get("/stats");
        CHECK(status == 200);
        CHECK(st["annotations"] == 11);
        CHECK(st["claims_annotated"] == 3);
        std::map<std::string, std::string> majority;
        for (const auto& c : st["per_claim"]) majority[c["instance_id"]] = c["majority"];
        CHECK(majority["c3"] == "A");
        CHECK(majority["c2"] == "no_majority");
        CHECK(majority["c1"] == "B");
        CHECK(st["majority"]["no_majority"] == 1);

        // c2 and c3 both have five annotations; c1 has one and is left out.
        CHECK(st["fleiss_kappa"].get<double>() == doctest::Approx(fleiss_kappa({{3, 1, 1}, {2, 2, 1}})));

        std::size_t existing = 0, suggested = 0;
        for (const auto& r : s.store.records()) {
            if (r.preference == Preference::None) continue;
            const Pane chosen = r.preference == Preference::A ? Pane::A : Pane::B;
            (chosen == s.service.original_pane(r.item_id) ? existing : suggested)++;
        }
        CHECK(st["sign_test"]["existing_wins"] == existing);
        CHECK(st["sign_test"]["suggested_wins"] == suggested);
        CHECK(st["sign_test"]["one_tail"] == sign_test(suggested, existing).one_tail);

        const auto& shares = st["preference_shares"];
        CHECK(shares["existing"].get<double>() + shares["suggested"].get<double>() +
                  shares["none"].get<double>() ==
              doctest::Approx(1.0));
        CHECK(shares["none"].get<double>() == doctest::Approx(2.0 / 11.0));
        REQUIRE(st["buckets"].size() == 2);
        CHECK(st["buckets"][0]["claims"] == 2);
        CHECK(st["buckets"][0]["annotations"] == 5);
        CHECK(st["buckets"][1]["annotations"] == 6);
        before = st;
    }
    {
        Server s(log, 7);
        CHECK(s.get("/stats").second == before);
        CHECK(s.annotate("c3", "u0", "B").first == 409);
    }
    CHECK_THROWS_AS(AnnotationStore(log, 8), ConfigError);
}

TEST_CASE("empty stats") {
    testsupport::TempDir dir;
    AnnotationStore store(dir / "a.jsonl", 1);
    ReviewService svc(items(), store, ServiceOptions{1, 0, {0.0}});
    const auto st = svc.stats().body;
    CHECK(st["annotations"] == 0);
    CHECK(st["preference_shares"].is_null());
    CHECK(st["fleiss_kappa"].is_null());
    CHECK(st["sign_test"].is_null());
}

TEST_CASE("queue limit") {
    testsupport::TempDir dir;
    AnnotationStore store(dir / "a.jsonl", 1);
    ReviewService svc(items(), store, ServiceOptions{1, 2, {0.0}});
    const auto q = svc.queue().body;
    REQUIRE(q.size() == 2);
    CHECK(q[0]["instance_id"] == "c2");
}

TEST_CASE("annotation log format") {
    testsupport::TempDir dir;
    const auto log = dir / "a.jsonl";
    {
        AnnotationStore store(log, 3);
        AnnotationRecord r{"c1", "u1", Preference::B, {{Pane::A, EvidenceLevel::Partial}}};
        CHECK(store.append(r));
        CHECK(!store.append(r));
    }
    const auto text = testsupport::slurp(log);
    const auto first_line = text.substr(0, text.find('\n'));
    CHECK(json::parse(first_line) == json{{"format", "citeverify-annotations/1"}, {"seed", 3}});
    AnnotationStore reopened(log, 3);
    REQUIRE(reopened.records().size() == 1);
    CHECK(reopened.records()[0].evidence_level.at(Pane::A) == EvidenceLevel::Partial);
    CHECK(annotation_from_json(to_json(reopened.records()[0])) == reopened.records()[0]);

    testsupport::spit(dir / "bad.jsonl", "{\"format\":\"citeverify-annotations/1\",\"seed\":3}\n{oops\n");
    CHECK_THROWS_AS(AnnotationStore(dir / "bad.jsonl", 3), ParseError);
}
