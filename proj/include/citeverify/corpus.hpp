#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace citeverify {

inline constexpr std::string_view kCitationMarker = "[CIT]";
inline constexpr std::size_t kDefaultWindowWords = 100;

/// A cited or retrievable web source.
struct Document {
    std::string url;
    std::string title;
    std::string text;
    /// Fields present in the input that the library does not interpret.
    /// They are written back unchanged.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Document&) const = default;
};

using PassageId = std::uint32_t;

/// A fixed-size word window over a document.
struct Passage {
    std::string doc_url;
    std::size_t index = 0;       // window ordinal within the document
    std::size_t word_begin = 0;  // [word_begin, word_end) in document word offsets
    std::size_t word_end = 0;
    std::string text;

    std::size_t word_count() const { return word_end - word_begin; }
    bool operator==(const Passage&) const = default;
};

struct ClaimContext {
    std::string article_title;
    std::string section_path;
    std::string claim_sentence;
    std::string preceding_text;
};

/// One claim-citation record.
struct WaferInstance {
    std::string instance_id;
    std::string article_title;
    std::string section_path;
    std::string context_with_marker;
    std::string cited_url;
    std::string cited_title;
    bool featured = false;
    bool failed_verification = false;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const WaferInstance&) const = default;
};

enum class SplitName { Train, Dev, Test, FailDev, FailTest };

std::string_view to_string(SplitName name);
std::optional<SplitName> split_from_string(std::string_view name);

struct DatasetSplit {
    SplitName name;
    std::set<std::string> instance_ids;
};

struct SplitRatios {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

/// Windows start at 0, stride, 2*stride, ... while the start is inside the
/// document; the last window may be shorter. Requires 1 <= stride <= window.
std::vector<Passage> chunk_document(const Document& doc, std::size_t window_words,
                                    std::size_t stride_words);

/// The claim is the last sentence before the citation marker. Throws NoClaim
/// when only whitespace precedes the marker and std::invalid_argument when
/// the marker is missing.
ClaimContext extract_claim_context(const WaferInstance& inst);

/// Article-level split. Every article lands wholly in one of train/dev/test;
/// articles containing a featured instance are kept out of train, and
/// failed-verification instances go only to fail-dev/fail-test. Returns the
/// five splits in SplitName order.
std::vector<DatasetSplit> split_by_article(std::span<const WaferInstance> instances,
                                           SplitRatios ratios, std::uint64_t seed);

/// Passages of a document collection addressed by dense ids in chunking order.
class PassageStore {
public:
    PassageStore() = default;
    PassageStore(std::vector<Document> documents, std::size_t window_words,
                 std::size_t stride_words);

    std::size_t size() const { return passages_.size(); }
    bool empty() const { return passages_.empty(); }
    const Passage& at(PassageId id) const;
    std::span<const Passage> passages() const { return passages_; }
    std::span<const Document> documents() const { return documents_; }

    const Document* find_document(std::string_view url) const;
    /// Passage ids of a document in window order; empty for unknown urls.
    std::span<const PassageId> passages_of(std::string_view url) const;

    std::size_t window_words() const { return window_; }
    std::size_t stride_words() const { return stride_; }

private:
    std::vector<Document> documents_;
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> doc_by_url_;
    std::vector<std::vector<PassageId>> passages_by_doc_;
    std::size_t window_ = kDefaultWindowWords;
    std::size_t stride_ = kDefaultWindowWords;
};

// JSON Lines codecs. Readers raise ParseError carrying the line number and
// the offending field name. Unknown fields round-trip through `extra`.

nlohmann::json to_json(const Document& doc);
nlohmann::json to_json(const WaferInstance& inst);
Document document_from_json(const nlohmann::json& j);
WaferInstance instance_from_json(const nlohmann::json& j);

template <class T>
std::vector<T> read_jsonl(std::istream& in, const std::string& source_name);
template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path);
template <class T>
void write_jsonl(std::ostream& out, std::span<const T> records);
template <class T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> records);

extern template std::vector<Document> read_jsonl<Document>(std::istream&, const std::string&);
extern template std::vector<WaferInstance> read_jsonl<WaferInstance>(std::istream&,
                                                                     const std::string&);
extern template std::vector<Document> read_jsonl<Document>(const std::filesystem::path&);
extern template std::vector<WaferInstance> read_jsonl<WaferInstance>(
    const std::filesystem::path&);
extern template void write_jsonl<Document>(std::ostream&, std::span<const Document>);
extern template void write_jsonl<WaferInstance>(std::ostream&, std::span<const WaferInstance>);
extern template void write_jsonl<Document>(const std::filesystem::path&,
                                           std::span<const Document>);
extern template void write_jsonl<WaferInstance>(const std::filesystem::path&,
                                                std::span<const WaferInstance>);

}  // namespace citeverify
