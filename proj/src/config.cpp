#include "citeverify/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "citeverify/errors.hpp"
#include "citeverify/text.hpp"

namespace citeverify {

KeyValueFile KeyValueFile::parse(std::istream& in, const std::string& source_name) {
    KeyValueFile file;
    file.source_ = source_name;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) + ": empty key");
        }
        auto [it, inserted] = file.entries_.try_emplace(key, Entry{value, lineno});
        if (!inserted) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) + ": key '" + key +
                              "' already set on line " + std::to_string(it->second.line));
        }
    }
    return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse(in, path.string());
}

namespace {

[[noreturn]] void bad_value(const KeyValueFile& file, const std::string& key,
                            const KeyValueFile::Entry& e, const std::string& why) {
    throw ConfigError(file.source() + ":" + std::to_string(e.line) + ": key '" + key + "': " +
                      why + " (got '" + e.value + "')");
}

template <class T>
T parse_number(const KeyValueFile& file, const std::string& key, const KeyValueFile::Entry& e) {
    T out{};
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) bad_value(file, key, e, "expected a number");
    return out;
}

bool parse_bool(const KeyValueFile& file, const std::string& key, const KeyValueFile::Entry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    bad_value(file, key, e, "expected true or false");
}

std::vector<double> parse_list(const KeyValueFile& file, const std::string& key,
                               const KeyValueFile::Entry& e) {
    std::vector<double> out;
    std::string_view rest = e.value;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string item(trim(rest.substr(0, comma)));
        KeyValueFile::Entry sub{item, e.line};
        if (!item.empty()) out.push_back(parse_number<double>(file, key, sub));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const KeyValueFile& file,
                                         const std::filesystem::path& base_dir) {
    PipelineConfig c;
    for (auto* p : {&c.documents, &c.instances, &c.artifacts_dir, &c.annotations}) *p = base_dir / *p;
    using Setter = std::function<void(const std::string&, const KeyValueFile::Entry&)>;
    auto size = [&](std::size_t& dst) -> Setter {
        return [&](const std::string& k, const KeyValueFile::Entry& e) {
            dst = parse_number<std::size_t>(file, k, e);
        };
    };
    auto real = [&](double& dst) -> Setter {
        return [&](const std::string& k, const KeyValueFile::Entry& e) {
            dst = parse_number<double>(file, k, e);
        };
    };
    auto path = [&](std::filesystem::path& dst) -> Setter {
        return [&](const std::string& k, const KeyValueFile::Entry& e) {
            if (e.value.empty()) bad_value(file, k, e, "expected a path");
            dst = std::filesystem::path(e.value);
            if (dst.is_relative()) dst = base_dir / dst;
        };
    };

    const std::map<std::string, Setter> setters = {
        {"documents", path(c.documents)},
        {"instances", path(c.instances)},
        {"artifacts_dir", path(c.artifacts_dir)},
        {"annotations", path(c.annotations)},
        {"window_words", size(c.window_words)},
        {"stride_words", size(c.stride_words)},
        {"k_sparse", size(c.k_sparse)},
        {"k_dense", size(c.k_dense)},
        {"expansion_terms", size(c.expansion_terms)},
        {"bm25_k1", real(c.bm25.k1)},
        {"bm25_b", real(c.bm25.b)},
        {"dense_d_in", size(c.encoder.d_in)},
        {"dense_d_out", size(c.encoder.d_out)},
        {"dense_temperature", real(c.encoder.temperature)},
        {"shared_encoder",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             c.shared_encoder = parse_bool(file, k, e);
         }},
        {"biencoder_batch_size", size(c.biencoder.batch_size)},
        {"biencoder_learning_rate", real(c.biencoder.learning_rate)},
        {"biencoder_epochs", size(c.biencoder.epochs)},
        {"em_epochs", size(c.em.epochs)},
        {"em_learning_rate", real(c.em.learning_rate)},
        {"em_negatives", size(c.em.negatives)},
        {"flag_threshold", real(c.flag_threshold)},
        {"calibration_quantile", real(c.calibration_quantile)},
        {"prefix_budget_words", size(c.prefix_budget_words)},
        {"split_train", real(c.split_ratios.train)},
        {"split_dev", real(c.split_ratios.dev)},
        {"split_test", real(c.split_ratios.test)},
        {"seed",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             c.seed = parse_number<std::uint64_t>(file, k, e);
         }},
        {"host",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             if (e.value.empty()) bad_value(file, k, e, "expected a host name");
             c.host = e.value;
         }},
        {"port",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             c.port = parse_number<int>(file, k, e);
         }},
        {"queue_limit", size(c.queue_limit)},
        {"review_split",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             if (!split_from_string(e.value)) bad_value(file, k, e, "unknown split");
             c.review_split = e.value;
         }},
        {"bucket_edges",
         [&](const std::string& k, const KeyValueFile::Entry& e) {
             c.bucket_edges = parse_list(file, k, e);
         }},
    };

    for (const auto& [key, entry] : file.entries()) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError(file.source() + ":" + std::to_string(entry.line) + ": unknown key '" +
                              key + "'");
        }
        it->second(key, entry);
    }
    c.encoder.seed = c.seed;
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(file.source() + ": " + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    return from_file(KeyValueFile::load(path), path.parent_path());
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (window_words == 0) fail("window_words must be >= 1");
    if (stride_words == 0 || stride_words > window_words) {
        fail("stride_words must lie in [1, window_words]");
    }
    if (k_sparse == 0) fail("k_sparse must be >= 1");
    if (k_dense == 0) fail("k_dense must be >= 1");
    if (encoder.d_out == 0 || encoder.d_in < encoder.d_out) fail("need dense_d_in >= dense_d_out >= 1");
    if (!(encoder.temperature > 0.0)) fail("dense_temperature must be > 0");
    if (biencoder.batch_size == 0) fail("biencoder_batch_size must be >= 1");
    if (!(calibration_quantile >= 0.0 && calibration_quantile <= 1.0)) {
        fail("calibration_quantile must lie in [0, 1]");
    }
    if (prefix_budget_words == 0) fail("prefix_budget_words must be >= 1");
    const double sum = split_ratios.train + split_ratios.dev + split_ratios.test;
    if (!(split_ratios.train > 0 && split_ratios.dev > 0 && split_ratios.test > 0) ||
        std::abs(sum - 1.0) > 1e-9) {
        fail("split ratios must be positive and sum to 1");
    }
    if (port < 0 || port > 65535) fail("port must lie in [0, 65535]");
    for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
        if (!(bucket_edges[i - 1] < bucket_edges[i])) fail("bucket_edges must be strictly increasing");
    }
}

}  // namespace citeverify
