#include "citeverify/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"
#include "citeverify/url.hpp"

namespace citeverify {

using nlohmann::json;

std::string_view to_string(SplitName name) {
    switch (name) {
        case SplitName::Train: return "train";
        case SplitName::Dev: return "dev";
        case SplitName::Test: return "test";
        case SplitName::FailDev: return "fail-dev";
        case SplitName::FailTest: return "fail-test";
    }
    return "unknown";
}

std::optional<SplitName> split_from_string(std::string_view name) {
    for (auto s : {SplitName::Train, SplitName::Dev, SplitName::Test, SplitName::FailDev,
                   SplitName::FailTest}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

std::vector<Passage> chunk_document(const Document& doc, std::size_t window_words,
                                    std::size_t stride_words) {
    if (window_words == 0 || stride_words == 0 || stride_words > window_words) {
        throw std::invalid_argument("chunk_document requires 1 <= stride <= window");
    }
    const auto words = split_words(doc.text);
    std::vector<Passage> out;
    for (std::size_t start = 0, idx = 0; start < words.size(); start += stride_words, ++idx) {
        const std::size_t end = std::min(words.size(), start + window_words);
        out.push_back(Passage{doc.url, idx, start, end, join_words(words, start, end)});
    }
    return out;
}

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

ClaimContext extract_claim_context(const WaferInstance& inst) {
    const std::string_view context = inst.context_with_marker;
    if (count_occurrences(context, kCitationMarker) != 1) {
        throw std::invalid_argument("instance '" + inst.instance_id +
                                    "' must contain exactly one citation marker");
    }
    const std::string_view before = trim(context.substr(0, context.find(kCitationMarker)));
    if (before.empty()) {
        throw NoClaim("instance '" + inst.instance_id + "' has no text before the marker");
    }

    std::size_t boundary = std::string_view::npos;
    for (std::size_t i = before.size() - 1; i-- > 0;) {
        if (is_sentence_end(before[i]) && is_ws(before[i + 1])) {
            boundary = i;
            break;
        }
    }

    ClaimContext ctx;
    ctx.article_title = inst.article_title;
    ctx.section_path = inst.section_path;
    if (boundary == std::string_view::npos) {
        ctx.claim_sentence = std::string(before);
    } else {
        ctx.claim_sentence = std::string(trim(before.substr(boundary + 1)));
        ctx.preceding_text = std::string(trim(before.substr(0, boundary + 1)));
    }
    return ctx;
}

std::vector<DatasetSplit> split_by_article(std::span<const WaferInstance> instances,
                                           SplitRatios ratios, std::uint64_t seed) {
    if (!(ratios.train > 0 && ratios.dev > 0 && ratios.test > 0) ||
        std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must be positive and sum to 1");
    }

    std::unordered_set<std::string> featured_articles;
    for (const auto& inst : instances) {
        if (inst.featured && !inst.failed_verification) featured_articles.insert(inst.article_title);
    }

    std::vector<DatasetSplit> splits;
    for (auto s : {SplitName::Train, SplitName::Dev, SplitName::Test, SplitName::FailDev,
                   SplitName::FailTest}) {
        splits.push_back(DatasetSplit{s, {}});
    }

    for (const auto& inst : instances) {
        // 53 high bits give a uniform double in [0, 1).
        const double u = static_cast<double>(stable_hash(inst.article_title, seed) >> 11) *
                         0x1.0p-53;
        SplitName target;
        if (inst.failed_verification) {
            target = u < 0.5 ? SplitName::FailDev : SplitName::FailTest;
        } else if (featured_articles.contains(inst.article_title)) {
            target = u < ratios.dev / (ratios.dev + ratios.test) ? SplitName::Dev
                                                                 : SplitName::Test;
        } else if (u < ratios.train) {
            target = SplitName::Train;
        } else if (u < ratios.train + ratios.dev) {
            target = SplitName::Dev;
        } else {
            target = SplitName::Test;
        }
        splits[static_cast<std::size_t>(target)].instance_ids.insert(inst.instance_id);
    }
    return splits;
}

PassageStore::PassageStore(std::vector<Document> documents, std::size_t window_words,
                           std::size_t stride_words)
    : documents_(std::move(documents)), window_(window_words), stride_(stride_words) {
    passages_by_doc_.resize(documents_.size());
    for (std::size_t d = 0; d < documents_.size(); ++d) {
        const auto& doc = documents_[d];
        if (!doc_by_url_.emplace(doc.url, d).second) {
            throw Error("duplicate document url '" + doc.url + "'");
        }
        for (auto& p : chunk_document(doc, window_words, stride_words)) {
            passages_by_doc_[d].push_back(static_cast<PassageId>(passages_.size()));
            passages_.push_back(std::move(p));
        }
    }
}

const Passage& PassageStore::at(PassageId id) const {
    if (id >= passages_.size()) {
        throw UnknownPassage("passage id " + std::to_string(id) + " out of range");
    }
    return passages_[id];
}

const Document* PassageStore::find_document(std::string_view url) const {
    const auto it = doc_by_url_.find(std::string(url));
    return it == doc_by_url_.end() ? nullptr : &documents_[it->second];
}

std::span<const PassageId> PassageStore::passages_of(std::string_view url) const {
    const auto it = doc_by_url_.find(std::string(url));
    if (it == doc_by_url_.end()) return {};
    return passages_by_doc_[it->second];
}

// ---------------------------------------------------------------------------
// JSON Lines

namespace {

// Thrown while decoding one object; the reader attaches the line number.
struct FieldError {
    std::string field;
    std::string message;
};

std::string get_string(const json& j, const char* field, bool is_required) {
    const auto it = j.find(field);
    if (it == j.end()) {
        if (is_required) throw FieldError{field, "missing required field"};
        return {};
    }
    if (!it->is_string()) throw FieldError{field, "expected a string"};
    return it->get<std::string>();
}

bool get_bool(const json& j, const char* field) {
    const auto it = j.find(field);
    if (it == j.end()) return false;
    if (!it->is_boolean()) throw FieldError{field, "expected a boolean"};
    return it->get<bool>();
}

json extra_fields(const json& j, std::initializer_list<const char*> known) {
    json extra = json::object();
    for (const auto& [key, value] : j.items()) {
        bool is_known = false;
        for (const char* k : known) is_known = is_known || key == k;
        if (!is_known) extra[key] = value;
    }
    return extra;
}

void merge_extra(json& j, const json& extra) {
    for (const auto& [key, value] : extra.items()) {
        if (!j.contains(key)) j[key] = value;
    }
}

Document decode_document(const json& j) {
    if (!j.is_object()) throw FieldError{"<record>", "expected a JSON object"};
    Document doc;
    doc.url = get_string(j, "url", true);
    doc.title = get_string(j, "title", true);
    doc.text = get_string(j, "text", true);
    try {
        parse_url(doc.url);
    } catch (const MalformedUrl& e) {
        throw FieldError{"url", e.what()};
    }
    doc.extra = extra_fields(j, {"url", "title", "text"});
    return doc;
}

WaferInstance decode_instance(const json& j) {
    if (!j.is_object()) throw FieldError{"<record>", "expected a JSON object"};
    WaferInstance inst;
    inst.instance_id = get_string(j, "instance_id", true);
    inst.article_title = get_string(j, "article_title", true);
    inst.section_path = get_string(j, "section_path", false);
    inst.context_with_marker = get_string(j, "context_with_marker", true);
    inst.cited_url = get_string(j, "cited_url", true);
    inst.cited_title = get_string(j, "cited_title", false);
    inst.featured = get_bool(j, "featured");
    inst.failed_verification = get_bool(j, "failed_verification");
    if (inst.cited_url.empty()) throw FieldError{"cited_url", "must be non-empty"};
    if (count_occurrences(inst.context_with_marker, kCitationMarker) != 1) {
        throw FieldError{"context_with_marker", "must contain exactly one [CIT] marker"};
    }
    inst.extra = extra_fields(j, {"instance_id", "article_title", "section_path",
                                  "context_with_marker", "cited_url", "cited_title", "featured",
                                  "failed_verification"});
    return inst;
}

template <class T>
T decode(const json& j);

template <>
Document decode<Document>(const json& j) {
    return decode_document(j);
}

template <>
WaferInstance decode<WaferInstance>(const json& j) {
    return decode_instance(j);
}

}  // namespace

Document document_from_json(const json& j) {
    try {
        return decode_document(j);
    } catch (const FieldError& e) {
        throw ParseError("<json>", 0, "field '" + e.field + "': " + e.message);
    }
}

WaferInstance instance_from_json(const json& j) {
    try {
        return decode_instance(j);
    } catch (const FieldError& e) {
        throw ParseError("<json>", 0, "field '" + e.field + "': " + e.message);
    }
}

json to_json(const Document& doc) {
    json j = {{"url", doc.url}, {"title", doc.title}, {"text", doc.text}};
    merge_extra(j, doc.extra);
    return j;
}

json to_json(const WaferInstance& inst) {
    json j = {{"instance_id", inst.instance_id},
              {"article_title", inst.article_title},
              {"section_path", inst.section_path},
              {"context_with_marker", inst.context_with_marker},
              {"cited_url", inst.cited_url},
              {"cited_title", inst.cited_title},
              {"featured", inst.featured},
              {"failed_verification", inst.failed_verification}};
    merge_extra(j, inst.extra);
    return j;
}

template <class T>
std::vector<T> read_jsonl(std::istream& in, const std::string& source_name) {
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source_name, lineno, std::string("invalid JSON: ") + e.what());
        }
        try {
            out.push_back(decode<T>(j));
        } catch (const FieldError& e) {
            throw ParseError(source_name, lineno, "field '" + e.field + "': " + e.message);
        }
    }
    return out;
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return read_jsonl<T>(in, path.string());
}

template <class T>
void write_jsonl(std::ostream& out, std::span<const T> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

template <class T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_jsonl<T>(out, records);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

template std::vector<Document> read_jsonl<Document>(std::istream&, const std::string&);
template std::vector<WaferInstance> read_jsonl<WaferInstance>(std::istream&, const std::string&);
template std::vector<Document> read_jsonl<Document>(const std::filesystem::path&);
template std::vector<WaferInstance> read_jsonl<WaferInstance>(const std::filesystem::path&);
template void write_jsonl<Document>(std::ostream&, std::span<const Document>);
template void write_jsonl<WaferInstance>(std::ostream&, std::span<const WaferInstance>);
template void write_jsonl<Document>(const std::filesystem::path&, std::span<const Document>);
template void write_jsonl<WaferInstance>(const std::filesystem::path&,
                                         std::span<const WaferInstance>);

}  // namespace citeverify
