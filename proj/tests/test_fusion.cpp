#include <doctest.h>

#include <random>
#include <set>

#include "citeverify/fusion.hpp"

using namespace citeverify;

namespace {

PassageStore store_of(std::size_t docs, std::size_t passages_per_doc) {
    std::vector<Document> d;
    for (std::size_t i = 0; i < docs; ++i) {
        std::string text;
        for (std::size_t w = 0; w < passages_per_doc; ++w) text += "w" + std::to_string(w) + " ";
        d.push_back(Document{"https://d" + std::to_string(i) + ".org/", "", text, {}});
    }
    return PassageStore(std::move(d), 1, 1);
}

std::vector<ScoredPassage> ranked(std::vector<PassageId> ids) {
    std::vector<ScoredPassage> out;
    double s = 100.0;
    for (auto id : ids) out.push_back(ScoredPassage{id, s--});
    return out;
}

}  // namespace

TEST_CASE("disjoint lists of 100 give 200 candidates") {
    const auto store = store_of(40, 5);
    std::vector<PassageId> a, b;
    for (PassageId i = 0; i < 100; ++i) {
        a.push_back(i);
        b.push_back(100 + i);
    }
    const auto fused = merge(ranked(a), ranked(b), store);
    REQUIRE(fused.size() == 200);
    CHECK(fused[0].passage_id == 0);
    CHECK(fused[1].passage_id == 100);
    CHECK(fused[0].sparse_rank == 1u);
    CHECK(!fused[0].dense_rank);
    CHECK(fused[1].dense_rank == 1u);
    CHECK(fused[1].doc_url == store.at(100).doc_url);
}

TEST_CASE("identical lists set both provenances") {
    const auto store = store_of(2, 5);
    const auto list = ranked({3, 1, 4});
    auto dense = list;
    for (auto& h : dense) h.score /= 100.0;
    const auto fused = merge(list, dense, store);
    REQUIRE(fused.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fused[i].passage_id == list[i].passage_id);
        CHECK(fused[i].sparse_rank == i + 1);
        CHECK(fused[i].dense_rank == i + 1);
        CHECK(fused[i].sparse_score == list[i].score);
        CHECK(fused[i].dense_score == dense[i].score);
    }
}

TEST_CASE("one empty list returns the other unchanged") {
    const auto store = store_of(2, 5);
    const auto list = ranked({9, 2, 5});
    for (bool sparse_side : {true, false}) {
        const auto fused = sparse_side ? merge(list, {}, store) : merge({}, list, store);
        REQUIRE(fused.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(fused[i].passage_id == list[i].passage_id);
            CHECK((sparse_side ? fused[i].sparse_rank : fused[i].dense_rank) == i + 1);
            CHECK(!(sparse_side ? fused[i].dense_rank : fused[i].sparse_rank));
        }
    }
    CHECK(merge({}, {}, store).empty());
}

TEST_CASE("merge is a superset with each passage exactly once") {
    const auto store = store_of(20, 10);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PassageId> all(200);
        for (PassageId i = 0; i < 200; ++i) all[i] = i;
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<PassageId> a(all.begin(), all.begin() + rng() % 60);
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<PassageId> b(all.begin(), all.begin() + rng() % 60);

        const auto fused = merge(ranked(a), ranked(b), store);
        std::set<PassageId> expected(a.begin(), a.end());
        expected.insert(b.begin(), b.end());
        std::set<PassageId> seen;
        for (const auto& c : fused) {
            CHECK(seen.insert(c.passage_id).second);
            CHECK((c.sparse_rank || c.dense_rank));
            if (c.sparse_rank) CHECK(a[*c.sparse_rank - 1] == c.passage_id);
            if (c.dense_rank) CHECK(b[*c.dense_rank - 1] == c.passage_id);
        }
        CHECK(seen == expected);
        CHECK(fused.size() <= a.size() + b.size());
    }
}
