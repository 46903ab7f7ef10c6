#include "citeverify/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>
#include <string>

namespace citeverify {

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return uniform() < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

const std::vector<std::string> kFiller = {
    "the",  "of",    "and",   "in",   "to",    "a",     "was",   "for",  "on",
    "with", "as",    "by",    "at",   "from",  "that",  "which", "is",   "it",
    "its",  "this",  "also",  "after", "were", "their", "his",   "her",  "has",
    "had",  "been",  "over",  "into", "during", "later", "early", "when", "while",
};

class Lexicon {
public:
    explicit Lexicon(Rng& rng) : rng_(rng) {}

    std::string fresh() {
        static const std::vector<std::string> onsets = {
            "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
            "br", "cr", "dr", "gr", "pl", "st", "tr", "sh", "ch", "th"};
        static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
        static const std::vector<std::string> codas = {"", "", "n", "r", "s", "l", "m", "x"};
        for (;;) {
            std::string w;
            const std::size_t syllables = 2 + rng_.below(2);
            for (std::size_t s = 0; s < syllables; ++s) {
                w += rng_.pick(onsets);
                w += rng_.pick(vowels);
            }
            w += rng_.pick(codas);
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> fresh(std::size_t n) {
        std::vector<std::string> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(fresh());
        return out;
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

struct Topic {
    std::string heading;
    std::vector<std::string> words;
};

struct Entity {
    std::string first, last;
    std::size_t topic = 0;
    std::vector<std::string> facts;
    std::vector<std::string> synonyms;
    std::string year;

    std::string name() const { return capitalize(first) + " " + capitalize(last); }
};

using Words = std::vector<std::string>;

void append(Words& dst, const Words& src) { dst.insert(dst.end(), src.begin(), src.end()); }

std::string join(const Words& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// Fact words interleaved with filler at fixed slots, so that claim and
// evidence share long runs.
Words fact_phrase(const Entity& e, const std::vector<bool>* paraphrase) {
    Words out;
    static const std::size_t slots[] = {2, 5, 7};
    static const char* glue[] = {"the", "of", "and"};
    std::size_t g = 0;
    for (std::size_t i = 0; i < e.facts.size(); ++i) {
        if (g < 3 && i == slots[g]) out.push_back(glue[g++]);
        out.push_back(paraphrase && (*paraphrase)[i] ? e.synonyms[i] : e.facts[i]);
    }
    out.push_back("in");
    out.push_back(e.year);
    return out;
}

Words claim_sentence(const Entity& e) {
    Words s = {capitalize(e.first), capitalize(e.last)};
    append(s, fact_phrase(e, nullptr));
    s.back() += ".";
    return s;
}

class Writer {
public:
    Writer(Rng& rng, const std::vector<Topic>& topics) : rng_(rng), topics_(topics) {}

    // A plain sentence of topic vocabulary and filler.
    Words topic_sentence(std::size_t topic, std::size_t len) {
        Words s;
        for (std::size_t i = 0; i < len; ++i) {
            s.push_back(rng_.chance(0.45) ? rng_.pick(topics_[topic].words) : rng_.pick(kFiller));
        }
        s.front() = capitalize(s.front());
        s.back() += ".";
        return s;
    }

    // Topic sentences until `target` words are reached.
    void fill(Words& dst, std::size_t topic, std::size_t target) {
        while (dst.size() < target) append(dst, topic_sentence(topic, 10 + rng_.below(8)));
    }

    std::size_t random_topic() { return rng_.below(topics_.size()); }

private:
    Rng& rng_;
    const std::vector<Topic>& topics_;
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& o) {
    Rng rng(o.seed);
    Lexicon lex(rng);
    SyntheticCorpus out;

    std::vector<Topic> topics(o.topics);
    for (auto& t : topics) {
        t.heading = capitalize(lex.fresh());
        t.words = lex.fresh(25);
    }
    Writer writer(rng, topics);

    auto make_entity = [&] {
        Entity e;
        e.first = lex.fresh();
        e.last = lex.fresh();
        e.topic = rng.below(topics.size());
        e.facts = lex.fresh(o.fact_words);
        e.synonyms = lex.fresh(o.fact_words);
        e.year = std::to_string(1950 + rng.below(70));
        return e;
    };

    auto context_for = [&](const Entity& e) {
        Words pre = writer.topic_sentence(e.topic, 12);
        pre.insert(pre.begin() + 3, {capitalize(e.first), capitalize(e.last)});
        append(pre, writer.topic_sentence(e.topic, 10));
        Words ctx = pre;
        append(ctx, claim_sentence(e));
        ctx.push_back(std::string(kCitationMarker));
        append(ctx, writer.topic_sentence(e.topic, 8));
        return join(ctx);
    };

    std::vector<WaferInstance> instances;

    // Supported claims with gold and distractor documents.
    for (std::size_t i = 0; i < o.entities; ++i) {
        const Entity e = make_entity();
        const std::string slug = e.first + "-" + e.last;
        const bool featured = rng.chance(o.featured_share);
        const bool deep = rng.chance(o.deep_evidence_share);

        std::vector<bool> swap(e.facts.size());
        for (std::size_t k = 0; k < swap.size(); ++k) swap[k] = rng.chance(o.synonym_rate);
        Words evidence = {capitalize(e.first), capitalize(e.last)};
        append(evidence, fact_phrase(e, &swap));
        evidence.back() += ".";

        Words body;
        if (deep) {
            // A long digest on other subjects before the relevant item.
            const std::size_t other = writer.random_topic();
            writer.fill(body, other, 350 + rng.below(100));
            append(body, evidence);
            writer.fill(body, e.topic, body.size() + 80 + rng.below(120));
        } else {
            Words intro = writer.topic_sentence(e.topic, 12);
            intro.insert(intro.begin() + 2, {capitalize(e.first), capitalize(e.last)});
            append(body, intro);
            writer.fill(body, e.topic, 20 + rng.below(120));
            append(body, evidence);
            writer.fill(body, e.topic, body.size() + 200 + rng.below(200));
        }

        Document gold;
        if (rng.chance(o.shallow_gold_share)) {
            gold.url = "https://www." + slug + ".org/";
        } else {
            gold.url = "https://www." + lex.fresh() + ".com/" + topics[e.topic].words[0] + "/" +
                       e.year + "/" + slug + "-" + e.facts[0];
        }
        gold.title = e.name() + " " + capitalize(e.facts[0]);
        gold.text = join(body);
        out.documents.push_back(gold);

        for (std::size_t d = 0; d < o.distractors_per_entity; ++d) {
            Words leak;
            for (const auto& f : e.facts) {
                if (rng.chance(o.distractor_fact_share)) {
                    leak.push_back(f);
                    if (rng.chance(0.5)) leak.push_back(f);
                }
            }
            for (std::size_t m = 0; m < o.distractor_name_mentions; ++m) {
                leak.push_back(capitalize(e.first));
                leak.push_back(capitalize(e.last));
            }
            rng.shuffle(leak);
            Words text;
            std::size_t used = 0;
            while (used < leak.size()) {
                Words s = writer.topic_sentence(e.topic, 8 + rng.below(6));
                const std::size_t take = std::min<std::size_t>(2 + rng.below(2), leak.size() - used);
                for (std::size_t k = 0; k < take; ++k) {
                    s.insert(s.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(s.size() - 1)),
                             leak[used++]);
                }
                append(text, s);
            }
            writer.fill(text, e.topic, text.size() + 60 + rng.below(80));

            Document doc;
            doc.url = "https://" + lex.fresh() + ".net/" + topics[e.topic].words[1] + "/" + slug +
                      "-" + std::to_string(d + 1);
            doc.title = e.name() + " " + capitalize(topics[e.topic].words[2]);
            doc.text = join(text);
            out.documents.push_back(doc);
        }

        WaferInstance inst;
        inst.article_title = e.name();
        inst.section_path = topics[e.topic].heading;
        inst.context_with_marker = context_for(e);
        inst.cited_url = gold.url;
        inst.cited_title = gold.title;
        inst.featured = featured;
        instances.push_back(inst);
    }

    // Failed citations: the claim cites a generic homepage.
    for (std::size_t i = 0; i < o.failed_claims; ++i) {
        const Entity e = make_entity();
        const std::string site = lex.fresh();
        Words text;
        Words intro = writer.topic_sentence(e.topic, 12);
        intro.insert(intro.begin() + 4, {capitalize(e.first), capitalize(e.last)});
        append(text, intro);
        writer.fill(text, e.topic, 180 + rng.below(120));

        Document home;
        home.url = "https://www." + site + ".com/" + (rng.chance(0.5) ? "" : "about");
        home.title = capitalize(site) + " " + topics[e.topic].heading;
        home.text = join(text);
        out.documents.push_back(home);

        WaferInstance inst;
        inst.article_title = e.name();
        inst.section_path = topics[e.topic].heading;
        inst.context_with_marker = context_for(e);
        inst.cited_url = home.url;
        inst.cited_title = home.title;
        inst.failed_verification = true;
        instances.push_back(inst);
    }

    for (std::size_t i = 0; i < o.background_documents; ++i) {
        const std::size_t topic = writer.random_topic();
        Words text;
        writer.fill(text, topic, 150 + rng.below(350));
        Document doc;
        doc.url = "https://" + lex.fresh() + ".info/" + topics[topic].words[3] + "/" + lex.fresh();
        doc.title = topics[topic].heading + " " + capitalize(topics[topic].words[4]);
        doc.text = join(text);
        out.documents.push_back(doc);
    }

    rng.shuffle(out.documents);
    rng.shuffle(instances);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "claim-%04zu", i);
        instances[i].instance_id = id;
    }
    out.instances = std::move(instances);
    return out;
}

}  // namespace citeverify
