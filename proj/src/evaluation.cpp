#include "citeverify/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_set>

#include <boost/multiprecision/cpp_int.hpp>

#include "citeverify/url.hpp"

namespace citeverify {

std::vector<std::string> rank_documents(std::span<const ScoredPassage> passages,
                                        const PassageStore& store) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& p : passages) {
        const auto& url = store.at(p.passage_id).doc_url;
        if (seen.insert(url).second) out.push_back(url);
    }
    return out;
}

double precision_at_1(std::span<const RankedResult> results) {
    return success_rate_at_k(results, 1);
}

double success_rate_at_k(std::span<const RankedResult> results, std::size_t k) {
    if (results.empty()) throw EmptyInput("no ranked results");
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    std::size_t hits = 0;
    for (const auto& r : results) {
        const auto end = r.ranked_urls.begin() + std::min(k, r.ranked_urls.size());
        if (std::find(r.ranked_urls.begin(), end, r.gold_url) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::size_t url_depth(std::string_view url) {
    const auto parts = parse_url(url);
    std::size_t depth = 0;
    std::string_view path = parts.path;
    while (!path.empty()) {
        const auto slash = path.find('/');
        const auto segment = path.substr(0, slash);
        if (!segment.empty()) ++depth;
        if (slash == std::string_view::npos) break;
        path.remove_prefix(slash + 1);
    }
    return depth;
}

std::vector<PRPoint> pr_curve_failed(std::span<const ScoredCitation> scored) {
    std::vector<const ScoredCitation*> order;
    order.reserve(scored.size());
    std::size_t total_failed = 0;
    for (const auto& c : scored) {
        order.push_back(&c);
        total_failed += c.is_failed ? 1 : 0;
    }
    if (total_failed == 0 || total_failed == scored.size()) {
        throw DegenerateInput("need at least one failed and one non-failed citation");
    }
    std::sort(order.begin(), order.end(), [](const ScoredCitation* a, const ScoredCitation* b) {
        if (a->score != b->score) return a->score < b->score;
        return a->citation_id < b->citation_id;
    });

    std::vector<PRPoint> curve;
    curve.reserve(order.size());
    std::size_t failed = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        failed += order[i]->is_failed ? 1 : 0;
        curve.push_back(PRPoint{static_cast<double>(failed) / total_failed,
                                static_cast<double>(failed) / (i + 1)});
    }
    return curve;
}

std::optional<double> precision_at_recall(std::span<const PRPoint> curve, double recall) {
    for (const auto& p : curve) {
        if (p.recall >= recall) return p.precision;
    }
    return std::nullopt;
}

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
    if (counts.empty()) throw std::invalid_argument("fleiss_kappa needs at least one item");
    const std::size_t categories = counts.front().size();
    std::size_t raters = 0;
    for (auto c : counts.front()) raters += c;
    if (raters < 2) throw std::invalid_argument("fleiss_kappa needs at least 2 raters per item");

    std::vector<double> column(categories, 0.0);
    double p_bar = 0.0;
    for (const auto& row : counts) {
        if (row.size() != categories) {
            throw std::invalid_argument("fleiss_kappa rows differ in category count");
        }
        std::size_t sum = 0;
        double agree = 0.0;
        for (std::size_t j = 0; j < categories; ++j) {
            sum += row[j];
            column[j] += static_cast<double>(row[j]);
            agree += static_cast<double>(row[j]) * static_cast<double>(row[j]);
        }
        if (sum != raters) throw std::invalid_argument("fleiss_kappa rows differ in rater count");
        const double n = static_cast<double>(raters);
        p_bar += (agree - n) / (n * (n - 1.0));
    }
    const double items = static_cast<double>(counts.size());
    p_bar /= items;

    double p_e = 0.0;
    for (double c : column) {
        const double p = c / (items * static_cast<double>(raters));
        p_e += p * p;
    }
    if (p_e >= 1.0) throw DegenerateAgreement("all ratings fall in one category");
    return (p_bar - p_e) / (1.0 - p_e);
}

SignTestResult sign_test(std::size_t wins_a, std::size_t wins_b) {
    using boost::multiprecision::cpp_int;
    using boost::multiprecision::cpp_rational;

    SignTestResult r;
    r.n = wins_a + wins_b;
    if (r.n == 0) throw NoInformative("sign test over zero informative pairs");
    r.k = std::max(wins_a, wins_b);

    cpp_int binom = 1;  // C(n, i), starting at i = 0
    cpp_int tail = 0;
    for (std::size_t i = 0; i <= r.n; ++i) {
        if (i >= r.k) tail += binom;
        binom = binom * (r.n - i) / (i + 1);
    }
    const cpp_rational one_tail(tail, cpp_int(1) << r.n);
    r.one_tail = one_tail.convert_to<double>();
    const cpp_rational two_tail = one_tail * 2;
    r.two_tail = two_tail >= 1 ? 1.0 : two_tail.convert_to<double>();
    return r;
}

std::vector<ScoreBucket> bucket_by_score(std::span<const ScoredItem> items,
                                         std::span<const double> edges) {
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i - 1] < edges[i])) {
            throw std::invalid_argument("bucket edges must be strictly increasing");
        }
    }
    std::vector<ScoreBucket> buckets(edges.size() + 1);
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        if (i > 0) buckets[i].lower = edges[i - 1];
        if (i < edges.size()) buckets[i].upper = edges[i];
    }
    for (const auto& item : items) {
        const auto slot = std::upper_bound(edges.begin(), edges.end(), item.score) - edges.begin();
        buckets[static_cast<std::size_t>(slot)].ids.push_back(item.id);
    }
    return buckets;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["format"] = "citeverify-metrics/1";
    j["metrics"] = nlohmann::json::object();
    for (const auto& [name, value] : metrics) j["metrics"][name] = value;
    j["curves"] = nlohmann::json::object();
    for (const auto& [name, curve] : curves) {
        auto arr = nlohmann::json::array();
        for (const auto& p : curve) arr.push_back({{"recall", p.recall}, {"precision", p.precision}});
        j["curves"][name] = std::move(arr);
    }
    return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        for (const auto& [name, value] : j.at("metrics").items()) r.metrics[name] = value.get<double>();
        if (j.contains("curves")) {
            for (const auto& [name, arr] : j.at("curves").items()) {
                auto& curve = r.curves[name];
                for (const auto& p : arr) {
                    curve.push_back(PRPoint{p.at("recall").get<double>(), p.at("precision").get<double>()});
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("<metrics>", 0, e.what());
    }
    return r;
}

void MetricReport::write_csv(std::ostream& out) const {
    out << "curve,recall,precision\n";
    char buf[96];
    for (const auto& [name, curve] : curves) {
        for (const auto& p : curve) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", p.recall, p.precision);
            out << name << buf;
        }
    }
}

}  // namespace citeverify
