#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "citeverify/corpus.hpp"
#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"
#include "support.hpp"

using namespace citeverify;

namespace {

Document words_doc(std::size_t n) {
    Document d;
    d.url = "https://example.org/doc";
    d.title = "Doc";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) d.text += ' ';
        d.text += "w" + std::to_string(i);
    }
    return d;
}

WaferInstance instance(std::string id, std::string title, std::string context) {
    WaferInstance i;
    i.instance_id = std::move(id);
    i.article_title = std::move(title);
    i.section_path = "History";
    i.context_with_marker = std::move(context);
    i.cited_url = "https://example.org/a";
    return i;
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(tokenize("Mara Quell's 1987") == std::vector<std::string>{"mara", "quell", "s", "1987"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("A\xE2\x80\x94" "B") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("chunk_document window arithmetic") {
    const auto doc = words_doc(250);

    auto p = chunk_document(doc, 100, 100);
    REQUIRE(p.size() == 3);
    CHECK(p[0].word_count() == 100);
    CHECK(p[1].word_count() == 100);
    CHECK(p[2].word_count() == 50);

    p = chunk_document(doc, 100, 50);
    REQUIRE(p.size() == 5);
    const std::size_t starts[] = {0, 50, 100, 150, 200};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(p[i].word_begin == starts[i]);
        CHECK(p[i].index == i);
    }
    CHECK(p[4].word_count() == 50);

    CHECK(chunk_document(Document{"https://e.org/", "", "", {}}, 100, 100).empty());
    CHECK_THROWS_AS(chunk_document(doc, 10, 11), std::invalid_argument);
    CHECK_THROWS_AS(chunk_document(doc, 10, 0), std::invalid_argument);
}

TEST_CASE("chunk_document properties") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Document doc{"https://e.org/x", "t", testsupport::random_text(rng, 40, 0, 400), {}};
        const std::size_t window = 1 + rng() % 60;
        const std::size_t stride = 1 + rng() % window;
        const auto words = split_words(doc.text);

        // Non-overlapping windows reconstruct the word sequence.
        const auto flat = chunk_document(doc, window, window);
        std::vector<std::string_view> rebuilt;
        for (const auto& p : flat) {
            for (auto w : split_words(p.text)) rebuilt.push_back(w);
        }
        CHECK(rebuilt == words);

        std::vector<int> covered(words.size(), 0);
        for (const auto& p : chunk_document(doc, window, stride)) {
            CHECK(p.word_end - p.word_begin <= window);
            for (std::size_t i = p.word_begin; i < p.word_end; ++i) covered[i] = 1;
        }
        for (int c : covered) CHECK(c == 1);
    }
}

TEST_CASE("extract_claim_context") {
    auto ctx = extract_claim_context(instance(
        "i1", "Mara Quell",
        "Quell founded the group in 1990. She left the board in March 2004 after a dispute over "
        "funding, although she stated otherwise.[CIT] Later events followed."));
    CHECK(ctx.claim_sentence.rfind("She left the board in March 2004", 0) == 0);
    CHECK(ctx.preceding_text == "Quell founded the group in 1990.");
    CHECK(ctx.article_title == "Mara Quell");
    CHECK(ctx.section_path == "History");

    ctx = extract_claim_context(instance("i2", "t", "Only sentence. [CIT]"));
    CHECK(ctx.claim_sentence == "Only sentence.");
    CHECK(ctx.preceding_text.empty());

    CHECK_THROWS_AS(extract_claim_context(instance("i3", "t", "[CIT] trailing text")), NoClaim);
    CHECK_THROWS_AS(extract_claim_context(instance("i4", "t", "no marker here")),
                    std::invalid_argument);
    CHECK_THROWS_AS(extract_claim_context(instance("i5", "t", "a. [CIT] b. [CIT]")),
                    std::invalid_argument);
}

TEST_CASE("claim sentence is a substring of the text before the marker") {
    std::mt19937_64 rng(11);
    const char* enders[] = {". ", "! ", "? ", " ", ".", ", "};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const std::size_t pieces = 1 + rng() % 6;
        for (std::size_t i = 0; i < pieces; ++i) {
            text += testsupport::random_text(rng, 20, 1, 8);
            text += enders[rng() % 6];
        }
        const std::string context = text + "[CIT] tail";
        const auto ctx = extract_claim_context(instance("x", "t", context));
        const auto before = context.substr(0, context.find("[CIT]"));
        CHECK(!ctx.claim_sentence.empty());
        CHECK(before.find(ctx.claim_sentence) != std::string::npos);
    }
}

TEST_CASE("split_by_article") {
    std::vector<WaferInstance> insts;
    for (int i = 0; i < 200; ++i) {
        auto inst = instance("c" + std::to_string(i), "article " + std::to_string(i % 60),
                             "Claim. [CIT]");
        inst.featured = i % 60 == 7;
        inst.failed_verification = i % 13 == 0;
        insts.push_back(inst);
    }
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        const auto splits = split_by_article(insts, SplitRatios{}, seed);
        REQUIRE(splits.size() == 5);

        std::map<std::string, int> seen;
        for (const auto& s : splits) {
            for (const auto& id : s.instance_ids) ++seen[id];
        }
        CHECK(seen.size() == insts.size());
        for (const auto& [id, n] : seen) CHECK(n == 1);

        std::map<std::string, SplitName> article_split;
        for (const auto& inst : insts) {
            SplitName where = SplitName::Train;
            for (const auto& s : splits) {
                if (s.instance_ids.contains(inst.instance_id)) where = s.name;
            }
            if (inst.failed_verification) {
                CHECK((where == SplitName::FailDev || where == SplitName::FailTest));
                continue;
            }
            CHECK((where == SplitName::Train || where == SplitName::Dev || where == SplitName::Test));
            if (inst.featured) CHECK(where != SplitName::Train);
            auto [it, fresh] = article_split.emplace(inst.article_title, where);
            if (!fresh) CHECK(it->second == where);
        }

        const auto again = split_by_article(insts, SplitRatios{}, seed);
        for (std::size_t i = 0; i < 5; ++i) CHECK(again[i].instance_ids == splits[i].instance_ids);
    }
    CHECK_THROWS_AS(split_by_article(insts, SplitRatios{0.5, 0.5, 0.5}, 1), std::invalid_argument);
}

TEST_CASE("jsonl round trip") {
    std::vector<Document> docs = {
        {"https://a.org/1", "A", "alpha text", nlohmann::json::object()},
        {"https://b.org/2", "B \xC3\xA9t\xC3\xA9", "beta \"quoted\"\ntext", {{"lang", "en"}}},
        {"https://c.org/", "", "", nlohmann::json::object()},
    };
    std::stringstream ss;
    write_jsonl<Document>(ss, docs);
    CHECK(read_jsonl<Document>(ss, "mem") == docs);

    std::vector<WaferInstance> insts = {instance("x1", "T", "Claim. [CIT]")};
    insts[0].featured = true;
    insts[0].extra = {{"source", "wiki"}, {"n", 3}};
    std::stringstream si;
    write_jsonl<WaferInstance>(si, insts);
    CHECK(read_jsonl<WaferInstance>(si, "mem") == insts);

    std::stringstream empty;
    CHECK(read_jsonl<Document>(empty, "mem").empty());

    testsupport::TempDir dir;
    write_jsonl<Document>(dir / "d.jsonl", docs);
    CHECK(read_jsonl<Document>(dir / "d.jsonl") == docs);
    CHECK_THROWS_AS(read_jsonl<Document>(dir / "missing.jsonl"), IoError);
}

TEST_CASE("jsonl errors name line and field") {
    std::stringstream ss;
    ss << R"({"url":"https://a.org/","title":"A","text":"x"})" << "\n"
       << R"({"url":"https://b.org/","text":"x"})" << "\n";
    try {
        read_jsonl<Document>(ss, "docs.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("title") != std::string::npos);
    }

    std::stringstream bad;
    bad << "{not json\n";
    CHECK_THROWS_AS(read_jsonl<Document>(bad, "x"), ParseError);
}

TEST_CASE("PassageStore") {
    std::vector<Document> docs = {words_doc(250), Document{"https://e.org/b", "B", "one two", {}}};
    PassageStore store(docs, 100, 100);
    CHECK(store.size() == 4);
    CHECK(store.passages_of("https://example.org/doc").size() == 3);
    CHECK(store.passages_of("https://e.org/b").size() == 1);
    CHECK(store.passages_of("https://nowhere/").empty());
    CHECK(store.at(3).text == "one two");
    CHECK_THROWS_AS(store.at(4), UnknownPassage);
    CHECK(store.find_document("https://e.org/b")->title == "B");

    docs.push_back(docs[1]);
    CHECK_THROWS_AS(PassageStore(docs, 100, 100), Error);
}
