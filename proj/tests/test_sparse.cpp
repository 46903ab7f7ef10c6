#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "citeverify/errors.hpp"
#include "citeverify/sparse.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace citeverify;

namespace {

SparseQuery q(std::initializer_list<std::string> terms) { return SparseQuery{terms}; }

}  // namespace

TEST_CASE("index statistics") {
    const std::vector<std::string> texts = {"apple banana", "banana banana"};
    const auto index = InvertedIndex::build_from_texts(texts);
    CHECK(index.passage_count() == 2);
    CHECK(index.df("apple") == 1);
    CHECK(index.df("banana") == 2);
    CHECK(index.df("cherry") == 0);
    CHECK(index.avgdl() == 2.0);
    CHECK(index.postings("cherry").empty());
    CHECK(index.postings("banana")[1].tf == 2);
    CHECK(InvertedIndex::build_from_texts(texts) == index);
    CHECK_THROWS_AS(InvertedIndex::build_from_texts({}), EmptyCorpus);
}

TEST_CASE("bm25 hand-evaluated fixture") {
    const auto index = InvertedIndex::build_from_texts(std::vector<std::string>{"apple banana", "banana banana"});
    const double expected = std::log(2.0);
    CHECK(bm25_score(index, q({"apple"}), 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bm25_score(index, q({"apple"}), 0) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(bm25_score(index, q({"apple"}), 0, Bm25Params{2.4, 0.75}) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(bm25_score(index, q({"cherry"}), 0) == 0.0);
    CHECK(bm25_score(index, q({"apple"}), 1) == 0.0);
    CHECK_THROWS_AS(bm25_score(index, q({"apple"}), 2), UnknownPassage);
}

TEST_CASE("idf is positive and strictly decreasing in df") {
    for (std::size_t n : {1u, 2u, 10u, 1000u}) {
        double prev = INFINITY;
        for (std::size_t df = 0; df <= n; ++df) {
            const double v = bm25_idf(n, df);
            CHECK(v > 0.0);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("term weight is non-decreasing in tf") {
    for (double len : {1.0, 5.0, 40.0}) {
        double prev = 0.0;
        for (double tf = 0; tf <= 30; ++tf) {
            const double w = bm25_term_weight(1.3, tf, len, 10.0, Bm25Params{});
            CHECK(w >= prev);
            prev = w;
        }
    }
}

TEST_CASE("search matches brute force") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> texts;
        const std::size_t n = 1 + rng() % 300;
        for (std::size_t i = 0; i < n; ++i) texts.push_back(testsupport::random_text(rng, 60, 0, 30));
        const auto index = InvertedIndex::build_from_texts(texts);

        SparseQuery query;
        for (std::size_t i = 0, m = 1 + rng() % 6; i < m; ++i) {
            query.terms.push_back("w" + std::to_string(rng() % 70));
        }
        const std::size_t k = 1 + rng() % 50;
        const auto got = search(index, query, k);
        const auto want = oracle::bm25_top_k(texts, query.terms, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].passage_id == want[i].id);
            CHECK(got[i].score == want[i].score);
            CHECK(got[i].score == bm25_score(index, query, got[i].passage_id));
        }
    }
}

TEST_CASE("search edge cases") {
    const std::vector<std::string> texts = {"x y", "a b", "a b", "c"};
    const auto index = InvertedIndex::build_from_texts(texts);
    const auto hits = search(index, q({"a"}), 100);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].passage_id == 1);
    CHECK(hits[1].passage_id == 2);
    CHECK(hits[0].score == hits[1].score);
    CHECK(search(index, q({"zzz"}), 5).empty());
    CHECK_THROWS_AS(search(index, q({"a"}), 0), std::invalid_argument);
}

TEST_CASE("build_query is a multiset union") {
    ClaimContext ctx;
    ctx.article_title = "Mara Quell";
    ctx.claim_sentence = "Quell left the board.";
    auto query = build_query(ctx);
    CHECK(query.terms == std::vector<std::string>{"mara", "quell", "quell", "left", "the", "board"});
    const std::vector<std::string> extra = {"board", "funding"};
    query = build_query(ctx, extra);
    CHECK(std::count(query.terms.begin(), query.terms.end(), "board") == 2);
    CHECK(query.terms.back() == "funding");
}

TEST_CASE("expand_query") {
    const std::vector<std::string> texts = {"common rare1", "common", "common rare2 rare2", "common"};
    const auto background = InvertedIndex::build_from_texts(texts);
    ClaimContext ctx;
    ctx.section_path = "Common";
    ctx.preceding_text = "common rare2 rare1 rare1 unseen";

    CHECK(expand_query(ctx, 0, background).empty());
    const auto all = expand_query(ctx, 10, background);
    REQUIRE(all.size() == 4);
    CHECK(all.back() == "common");
    // unseen has the highest idf, rare1 has tf 2.
    CHECK(all[0] == "rare1");
    CHECK(all[1] == "unseen");
    CHECK(expand_query(ctx, 2, background) == std::vector<std::string>(all.begin(), all.begin() + 2));
}

TEST_CASE("index save and load") {
    std::mt19937_64 rng(8);
    std::vector<std::string> texts;
    for (int i = 0; i < 50; ++i) texts.push_back(testsupport::random_text(rng, 30, 0, 20));
    const auto index = InvertedIndex::build_from_texts(texts);
    std::stringstream ss;
    index.save(ss);
    const auto back = InvertedIndex::load(ss, "mem");
    CHECK(back == index);
    CHECK(back.df("w3") == index.df("w3"));

    std::stringstream bad("not an index");
    CHECK_THROWS_AS(InvertedIndex::load(bad, "mem"), ParseError);
}
