#include <doctest.h>

#include <algorithm>
#include <bit>
#include <numeric>
#include <random>
#include <sstream>

#include "citeverify/errors.hpp"
#include "citeverify/evaluation.hpp"

using namespace citeverify;

namespace {

RankedResult rr(std::string gold, std::vector<std::string> ranked) {
    return RankedResult{"id", std::move(gold), std::move(ranked)};
}

// Exhaustive enumeration of all 2^n equally likely outcomes.
std::vector<std::uint64_t> outcome_counts(std::size_t n) {
    std::vector<std::uint64_t> counts(n + 1, 0);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        ++counts[static_cast<std::size_t>(std::popcount(mask))];
    }
    return counts;
}

}  // namespace

TEST_CASE("precision at 1 and success rate") {
    const std::vector<RankedResult> all_first = {rr("a", {"a", "b"}), rr("c", {"c"})};
    CHECK(precision_at_1(all_first) == 1.0);
    const std::vector<RankedResult> absent = {rr("a", {"b", "c"}), rr("d", {})};
    CHECK(precision_at_1(absent) == 0.0);
    const std::vector<RankedResult> half = {rr("a", {"a"}), rr("b", {"x", "b"}), rr("c", {"c", "a"}),
                                            rr("d", {"x"})};
    CHECK(precision_at_1(half) == 0.5);
    CHECK(success_rate_at_k(half, 1) == 0.5);
    CHECK(success_rate_at_k(half, 2) == 0.75);
    CHECK(success_rate_at_k(half, 1000) == 0.75);

    const std::vector<RankedResult> fifth = {rr("g", {"1", "2", "3", "4", "g"})};
    CHECK(success_rate_at_k(fifth, 4) == 0.0);
    CHECK(success_rate_at_k(fifth, 5) == 1.0);

    CHECK_THROWS_AS(precision_at_1(std::vector<RankedResult>{}), EmptyInput);
    CHECK_THROWS_AS(success_rate_at_k(std::vector<RankedResult>{}, 3), EmptyInput);
    CHECK_THROWS_AS(success_rate_at_k(half, 0), std::invalid_argument);
}

TEST_CASE("success rate is monotone in k and starts at P@1") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RankedResult> results;
        for (int i = 0; i < 20; ++i) {
            std::vector<std::string> ranked;
            for (std::size_t j = 0, n = rng() % 10; j < n; ++j) ranked.push_back(std::to_string(j));
            results.push_back(rr(std::to_string(rng() % 12), ranked));
        }
        CHECK(success_rate_at_k(results, 1) == precision_at_1(results));
        double prev = 0;
        for (std::size_t k = 1; k <= 12; ++k) {
            const double v = success_rate_at_k(results, k);
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("rank_documents uses the best passage") {
    PassageStore store({Document{"https://a.org/", "", "x y z", {}}, Document{"https://b.org/", "", "p q", {}}},
                       1, 1);
    const std::vector<ScoredPassage> hits = {{3, 9}, {1, 8}, {4, 7}, {0, 6}};
    CHECK(rank_documents(hits, store) == std::vector<std::string>{"https://b.org/", "https://a.org/"});
}

TEST_CASE("url_depth") {
    CHECK(url_depth("http://www.gazette-example.com/2016/12/a-long-article-slug-here") == 3);
    CHECK(url_depth("https://example.com/") == 0);
    CHECK(url_depth("https://example.com") == 0);
    CHECK(url_depth("https://www.newsroom.example/world/2016/nov/03/long-slug-about-an-event") == 5);
    CHECK(url_depth("https://a.org//x///y/") == 2);
    for (std::string u : {"https://a.org/x/y", "http://b.net/", "https://c.com/1/2/3/4/"}) {
        CHECK(url_depth(u) == url_depth(u + "?x=1#y"));
        CHECK(url_depth(u) == url_depth(u + "#frag/more/segments"));
    }
    CHECK_THROWS_AS(url_depth("not a url"), MalformedUrl);
    CHECK_THROWS_AS(url_depth("https://"), MalformedUrl);
    CHECK_THROWS_AS(url_depth(""), MalformedUrl);
}

TEST_CASE("failed-verification PR curve") {
    const std::vector<ScoredCitation> fx = {{"a", -2, true}, {"b", -1, true}, {"c", 0, false},
                                            {"d", 1, true}, {"e", 2, false}};
    const auto curve = pr_curve_failed(fx);
    REQUIRE(curve.size() == 5);
    CHECK(curve[1] == PRPoint{2.0 / 3.0, 1.0});
    CHECK(curve[3].recall == 1.0);
    CHECK(curve[3].precision == 0.75);
    CHECK(precision_at_recall(curve, 2.0 / 3.0) == 1.0);
    CHECK(precision_at_recall(curve, 1.0) == 0.75);
    CHECK(precision_at_recall(curve, 0.5) == 1.0);

    const std::vector<ScoredCitation> separated = {{"a", -5, true}, {"b", -4, true}, {"c", 3, false}};
    const auto sep = pr_curve_failed(separated);
    REQUIRE(sep.size() == 3);
    CHECK(sep[0] == PRPoint{0.5, 1.0});
    CHECK(sep[1] == PRPoint{1.0, 1.0});
    CHECK(sep[2].precision == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(pr_curve_failed(std::vector<ScoredCitation>{{"a", 0, true}}), DegenerateInput);
    CHECK_THROWS_AS(pr_curve_failed(std::vector<ScoredCitation>{{"a", 0, false}}), DegenerateInput);
}

TEST_CASE("PR curve properties") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    double at_full = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<ScoredCitation> s;
        for (int i = 0; i < 200; ++i) s.push_back({std::to_string(i), u(rng), i % 2 == 0});
        const auto curve = pr_curve_failed(s);
        double prev = 0;
        for (const auto& p : curve) {
            CHECK(p.recall >= prev);
            prev = p.recall;
        }
        CHECK(curve.back().recall == 1.0);
        at_full += *precision_at_recall(curve, 1.0);
    }
    CHECK(at_full / trials == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("fleiss kappa") {
    CHECK(std::abs(fleiss_kappa({{2, 0}, {0, 2}}) - 1.0) <= 1e-9);
    CHECK(std::abs(fleiss_kappa({{1, 1}, {1, 1}}) + 1.0) <= 1e-9);
    CHECK(fleiss_kappa({{3, 0, 0}, {0, 3, 0}, {0, 0, 3}}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(fleiss_kappa({{2, 0}, {2, 0}}), DegenerateAgreement);
    CHECK_THROWS_AS(fleiss_kappa({{2, 0}, {1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(fleiss_kappa({}), std::invalid_argument);
}

TEST_CASE("fleiss kappa is invariant to item and category permutations") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t items = 2 + rng() % 8, cats = 2 + rng() % 4, raters = 2 + rng() % 5;
        std::vector<std::vector<std::size_t>> counts(items, std::vector<std::size_t>(cats, 0));
        for (auto& row : counts) {
            for (std::size_t r = 0; r < raters; ++r) ++row[rng() % cats];
        }
        double k;
        try {
            k = fleiss_kappa(counts);
        } catch (const DegenerateAgreement&) {
            continue;
        }
        auto shuffled = counts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::vector<std::size_t> perm(cats);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (auto& row : shuffled) {
            auto copy = row;
            for (std::size_t c = 0; c < cats; ++c) row[c] = copy[perm[c]];
        }
        CHECK(fleiss_kappa(shuffled) == doctest::Approx(k).epsilon(1e-12));
    }
}

TEST_CASE("majority vote") {
    enum class L { A, B, None };
    const std::vector<L> clear = {L::A, L::A, L::A, L::B, L::None};
    CHECK(majority_vote<L>(clear) == L::A);
    const std::vector<L> tie = {L::A, L::A, L::B, L::B, L::None};
    CHECK(!majority_vote<L>(tie));
    const std::vector<L> one = {L::None};
    CHECK(majority_vote<L>(one) == L::None);
    CHECK_THROWS_AS(majority_vote<L>(std::span<const L>{}), EmptyInput);
}

TEST_CASE("sign test fixtures") {
    auto r = sign_test(5, 0);
    CHECK(r.n == 5);
    CHECK(r.k == 5);
    CHECK(r.one_tail == 0.03125);
    CHECK(r.two_tail == 0.0625);
    CHECK(sign_test(0, 5).one_tail == 0.03125);

    r = sign_test(3, 3);
    // P(X >= 3) for n = 6: (20 + 15 + 6 + 1) / 64.
    CHECK(r.one_tail == 42.0 / 64.0);
    CHECK(r.two_tail == 1.0);
    CHECK_THROWS_AS(sign_test(0, 0), NoInformative);
}

TEST_CASE("sign test equals exhaustive enumeration for n <= 20") {
    for (std::size_t n = 1; n <= 20; ++n) {
        const auto counts = outcome_counts(n);
        for (std::size_t a = 0; a <= n; ++a) {
            const std::size_t k = std::max(a, n - a);
            std::uint64_t tail = 0;
            for (std::size_t i = k; i <= n; ++i) tail += counts[i];
            const double one = static_cast<double>(tail) / static_cast<double>(std::uint64_t{1} << n);
            const auto r = sign_test(a, n - a);
            CHECK(r.one_tail == one);
            CHECK(r.two_tail == std::min(1.0, 2.0 * one));
            if (2 * k > n) CHECK(r.two_tail == 2.0 * r.one_tail);
        }
    }
}

TEST_CASE("sign test handles large n") {
    const auto r = sign_test(700, 300);
    CHECK(r.one_tail > 0.0);
    CHECK(r.one_tail < 1e-30);
}

TEST_CASE("bucket_by_score") {
    const std::vector<double> zero = {0.0};
    auto b = bucket_by_score(std::vector<ScoredItem>{{"x", -1}, {"y", 1}}, zero);
    REQUIRE(b.size() == 2);
    CHECK(b[0].ids == std::vector<std::string>{"x"});
    CHECK(b[1].ids == std::vector<std::string>{"y"});
    CHECK(!b[0].lower);
    CHECK(b[0].upper == 0.0);
    CHECK(b[1].lower == 0.0);
    CHECK(!b[1].upper);

    const std::vector<double> edges = {-1.0, 0.0, 2.0};
    b = bucket_by_score(std::vector<ScoredItem>{}, edges);
    CHECK(b.size() == 4);
    for (const auto& bucket : b) CHECK(bucket.ids.empty());

    b = bucket_by_score(std::vector<ScoredItem>{{"e", 0.0}, {"f", 2.0}, {"g", -1.5}}, edges);
    CHECK(b[2].ids == std::vector<std::string>{"e"});
    CHECK(b[3].ids == std::vector<std::string>{"f"});
    CHECK(b[0].ids == std::vector<std::string>{"g"});

    const std::vector<double> bad = {1.0, 1.0};
    CHECK_THROWS_AS(bucket_by_score(std::vector<ScoredItem>{}, bad), std::invalid_argument);
}

TEST_CASE("metric report serialisation") {
    MetricReport r;
    r.metrics["sparse.p@1"] = 0.25;
    r.metrics["verifier.p@1"] = 0.5;
    r.curves["failed.verifier"] = {{0.5, 1.0}, {1.0, 0.75}};
    const auto j = r.to_json();
    CHECK(j["format"] == "citeverify-metrics/1");
    CHECK(MetricReport::from_json(j) == r);

    std::ostringstream csv;
    r.write_csv(csv);
    CHECK(csv.str() == "curve,recall,precision\nfailed.verifier,0.5,1\nfailed.verifier,1,0.75\n");
}
