// citeverify command line: synth, build-index, train, verify, evaluate, serve.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "citeverify/config.hpp"
#include "citeverify/errors.hpp"
#include "citeverify/pipeline.hpp"
#include "citeverify/service.hpp"
#include "citeverify/simd.hpp"
#include "citeverify/synthetic.hpp"

namespace cv = citeverify;

namespace {

cv::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

std::vector<cv::SplitName> parse_splits(const std::string& csv) {
    std::vector<cv::SplitName> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const auto name = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto s = cv::split_from_string(name);
        if (!s) throw cv::ConfigError("unknown split '" + name + "'");
        out.push_back(*s);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void write_config(const std::filesystem::path& path, std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw cv::IoError("cannot write '" + path.string() + "'");
    out << "# generated by citeverify synth\n"
        << "documents = documents.jsonl\n"
        << "instances = instances.jsonl\n"
        << "artifacts_dir = artifacts\n"
        << "annotations = annotations.jsonl\n"
        << "dense_d_in = 16384\n"
        << "split_train = 0.6\n"
        << "split_dev = 0.2\n"
        << "split_test = 0.2\n"
        << "seed = " << seed << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Citation verification pipeline"};
    app.require_subcommand(1);

    std::string config_path = "citeverify.conf";
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Config file (key = value)")
            ->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and a config for it");
    std::string synth_out = "synthetic";
    std::uint64_t synth_seed = cv::SyntheticOptions{}.seed;
    synth->add_option("-o,--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

    auto* build = app.add_subcommand("build-index", "Chunk, split and build both indexes");
    add_config(build);

    auto* train = app.add_subcommand("train", "Train encoders and verification scorer");
    add_config(train);

    auto* verify = app.add_subcommand("verify", "Print ranked JSON per instance");
    add_config(verify);
    std::string verify_split = "test";
    std::vector<std::string> verify_ids;
    verify->add_option("--split", verify_split, "Comma-separated splits")->capture_default_str();
    verify->add_option("--instance", verify_ids, "Instance ids (overrides --split)");

    auto* evaluate = app.add_subcommand("evaluate", "Compute a metric report");
    add_config(evaluate);
    std::string eval_split = "dev,test";
    std::string results_path, report_path, csv_path;
    evaluate->add_option("--split", eval_split, "Comma-separated retrieval splits")
        ->capture_default_str();
    evaluate->add_option("--results", results_path,
                         "JSON Lines of {instance_id, gold_url, ranked_urls}; skips the pipeline");
    evaluate->add_option("-o,--out", report_path, "Write the report here instead of stdout");
    evaluate->add_option("--csv", csv_path, "Write PR curves as CSV");

    auto* serve = app.add_subcommand("serve", "Start the review HTTP API");
    add_config(serve);
    int port_override = -1;
    serve->add_option("-p,--port", port_override, "Port (overrides the config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            cv::SyntheticOptions opts;
            opts.seed = synth_seed;
            const auto corpus = cv::generate_synthetic(opts);
            const std::filesystem::path dir(synth_out);
            std::filesystem::create_directories(dir);
            cv::write_jsonl<cv::Document>(dir / "documents.jsonl", corpus.documents);
            cv::write_jsonl<cv::WaferInstance>(dir / "instances.jsonl", corpus.instances);
            write_config(dir / "citeverify.conf", synth_seed);
            std::cerr << "wrote " << corpus.documents.size() << " documents and "
                      << corpus.instances.size() << " instances to " << dir.string() << "\n";
            return 0;
        }

        if (evaluate->parsed() && !results_path.empty()) {
            const auto rows = [&] {
                std::ifstream in(results_path);
                if (!in) throw cv::IoError("cannot open '" + results_path + "'");
                std::vector<cv::RankedResult> out;
                std::string line;
                std::size_t lineno = 0;
                while (std::getline(in, line)) {
                    ++lineno;
                    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                    try {
                        out.push_back(cv::ranked_result_from_json(nlohmann::json::parse(line)));
                    } catch (const std::exception& e) {
                        throw cv::ParseError(results_path, lineno, e.what());
                    }
                }
                return out;
            }();
            const auto report = cv::evaluate_rankings(rows);
            const auto text = report.to_json().dump(2);
            if (report_path.empty()) {
                std::cout << text << "\n";
            } else {
                std::ofstream(report_path) << text << "\n";
            }
            return 0;
        }

        const auto config = cv::PipelineConfig::load(config_path);
        std::cerr << "kernels: " << cv::simd::to_string(cv::simd::active_isa()) << "\n";

        if (build->parsed()) {
            cv::build_index(config);
            std::cerr << "indexes written to " << config.artifacts_dir.string() << "\n";
        } else if (train->parsed()) {
            const auto report = cv::train(config);
            std::cerr << "bi-encoder: " << report.biencoder_examples << " examples";
            if (!report.biencoder_losses.empty()) {
                std::fprintf(stderr, ", batch loss %.4f -> %.4f", report.biencoder_losses.front(),
                             report.biencoder_losses.back());
            }
            std::cerr << "\nscorer: " << report.em.skipped_instances << " instances skipped";
            if (!report.em.epoch_losses.empty()) {
                std::fprintf(stderr, ", epoch loss %.4f -> %.4f", report.em.epoch_losses.front(),
                             report.em.epoch_losses.back());
            }
            std::fprintf(stderr, ", bias shift %.4f\n", report.bias_shift);
        } else if (verify->parsed()) {
            const auto ws = cv::load_workspace(config);
            const auto retriever = ws.retriever(config);
            std::vector<cv::WaferInstance> targets;
            if (!verify_ids.empty()) {
                for (const auto& id : verify_ids) {
                    const auto it = std::find_if(ws.instances.begin(), ws.instances.end(),
                                                 [&](const auto& i) { return i.instance_id == id; });
                    if (it == ws.instances.end()) throw cv::Error("unknown instance '" + id + "'");
                    targets.push_back(*it);
                }
            } else {
                targets = ws.select(parse_splits(verify_split));
            }
            for (const auto& inst : targets) {
                const auto v = cv::verify_instance(config, ws, retriever, inst);
                std::cout << cv::to_json(v, ws.store).dump() << "\n";
            }
        } else if (evaluate->parsed()) {
            const auto ws = cv::load_workspace(config);
            const auto report = cv::evaluate_workspace(config, ws, parse_splits(eval_split));
            const auto text = report.to_json().dump(2);
            if (report_path.empty()) {
                std::cout << text << "\n";
            } else {
                std::ofstream out(report_path);
                if (!out) throw cv::IoError("cannot write '" + report_path + "'");
                out << text << "\n";
            }
            if (!csv_path.empty()) {
                std::ofstream out(csv_path);
                if (!out) throw cv::IoError("cannot write '" + csv_path + "'");
                report.write_csv(out);
            }
        } else if (serve->parsed()) {
            const auto ws = cv::load_workspace(config);
            const auto split = cv::split_from_string(config.review_split);
            const cv::SplitName names[] = {*split};
            auto items = cv::build_review_items(config, ws, ws.select(names));
            cv::AnnotationStore store(config.annotations, config.seed);
            cv::ReviewService service(std::move(items), store,
                                      cv::ServiceOptions{config.seed, config.queue_limit,
                                                         config.bucket_edges});
            cv::HttpServer server(service);
            const int port = server.bind(config.host, port_override >= 0 ? port_override : config.port);
            if (port < 0) throw cv::IoError("cannot bind " + config.host);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on http://" << config.host << ":" << port << "\n";
            server.listen_after_bind();
            g_server = nullptr;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
