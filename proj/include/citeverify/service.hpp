#pragma once

// Review service: a queue of claims ordered by the score of their existing
// citation, blind side-by-side comparison against the top suggestion, and an
// append-only annotation log.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "citeverify/config.hpp"
#include "citeverify/corpus.hpp"

namespace citeverify {

struct Workspace;

struct CitationView {
    std::string url;
    std::string title;
    std::string passage;
    std::string full_text;
    double score = 0.0;
};

struct ReviewItem {
    std::string instance_id;
    ClaimContext context;
    std::string context_text;  // with the citation marker
    CitationView original;
    CitationView suggested;
    bool flagged = false;
};

/// One item per claim that has at least one candidate besides its own
/// citation. Passages come from select_annotation_passage.
std::vector<ReviewItem> build_review_items(const PipelineConfig& config, const Workspace& ws,
                                           std::span<const WaferInstance> instances);

enum class Pane { A, B };
enum class Preference { A, B, None };
enum class EvidenceLevel { Enough, Partial, NoEvidence };

std::string_view to_string(Preference p);
std::string_view to_string(EvidenceLevel e);
std::optional<Preference> preference_from_string(std::string_view s);
std::optional<EvidenceLevel> evidence_level_from_string(std::string_view s);

struct AnnotationRecord {
    std::string item_id;
    std::string annotator_id;
    Preference preference = Preference::None;
    std::map<Pane, EvidenceLevel> evidence_level;

    bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::json to_json(const AnnotationRecord& r);
/// Throws std::invalid_argument describing the first problem.
AnnotationRecord annotation_from_json(const nlohmann::json& j);

/// Append-only JSON Lines log, one record per line after a header line
/// carrying the format tag and the server seed. Every append is fsync'd.
class AnnotationStore {
public:
    /// Creates the file if missing. Throws ParseError on a malformed log and
    /// ConfigError when the stored seed differs from `seed`.
    AnnotationStore(std::filesystem::path path, std::uint64_t seed);
    ~AnnotationStore();
    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    /// False, and nothing written, when (item, annotator) is already present.
    bool append(const AnnotationRecord& record);

    const std::vector<AnnotationRecord>& records() const { return records_; }
    std::uint64_t seed() const { return seed_; }

private:
    std::filesystem::path path_;
    std::uint64_t seed_;
    int fd_ = -1;
    std::vector<AnnotationRecord> records_;
    std::set<std::pair<std::string, std::string>> keys_;
};

struct ServiceOptions {
    std::uint64_t seed = 0;
    std::size_t queue_limit = 0;  // 0 = no limit
    std::vector<double> bucket_edges = {0.0};
};

class ReviewService {
public:
    struct Response {
        int status = 200;
        nlohmann::json body;
    };

    ReviewService(std::vector<ReviewItem> items, AnnotationStore& store, ServiceOptions options);

    /// Pane showing the existing citation; a function of (claim id, seed).
    Pane original_pane(const std::string& instance_id) const;

    Response queue() const;
    Response claim(const std::string& instance_id) const;
    Response annotate(const std::string& instance_id, const std::string& body);
    Response stats() const;

private:
    const ReviewItem* find(const std::string& id) const;

    std::vector<ReviewItem> items_;  // ascending original score
    std::map<std::string, std::size_t> index_;
    AnnotationStore& store_;
    ServiceOptions options_;
    mutable std::shared_mutex mutex_;
};

/// HTTP binding of ReviewService:
///   GET /queue, GET /claims/{id}, POST /claims/{id}/annotations, GET /stats
class HttpServer {
public:
    explicit HttpServer(ReviewService& service);
    ~HttpServer();

    /// Binds to `port`, or to a free port when port is 0. Returns the port,
    /// or -1 on failure.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace citeverify
