// Copyright 2026 The MURR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: corpus and stream generation, experiment runs, sweeps, reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "murr/murr.hpp"

namespace fs = std::filesystem;

namespace {

auto split_csv(std::string const& text) -> std::vector<std::string> {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

auto parse_doubles(std::string const& text) -> std::vector<double> {
    std::vector<double> out;
    for (auto const& item : split_csv(text)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (std::exception const&) {
            used = 0;
        }
        if (used != item.size()) {
            throw murr::ConfigError("not a number: " + item);
        }
        out.push_back(v);
    }
    return out;
}

void write_text(fs::path const& path, std::string const& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

struct RunArgs {
    std::string corpus;
    std::string stream;
    std::string strategies;
    std::string config;
    std::string out;
    bool resume = false;
};

auto load_run_inputs(RunArgs const& a) {
    auto corpus = murr::load_corpus_dir(a.corpus);
    auto stream = murr::load_stream(a.stream);
    murr::ExperimentConfig config;
    if (!a.config.empty()) {
        config = murr::load_experiment_config(a.config);
    }
    if (!a.strategies.empty()) {
        config.strategies.clear();
        for (auto const& s : split_csv(a.strategies)) {
            config.strategies.push_back(murr::parse_strategy(s));
        }
    }
    config.output_dir = a.out;
    config.resume = a.resume;
    config.threads = murr::threads_from_env();
    config.validate();
    return std::make_tuple(std::move(corpus), std::move(stream), std::move(config));
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--corpus", a.corpus, "Corpus directory (collection.tsv, queries.tsv, qrels.txt)")->required();
    cmd->add_option("--stream", a.stream, "Stream directory (stream.json)")->required();
    cmd->add_option("--config", a.config, "Experiment config JSON");
    cmd->add_option("--out", a.out, "Output directory")->required();
    cmd->add_flag("--resume", a.resume, "Reuse per-session artifacts already present under --out");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"murr: regularized-replay model updating for streaming dense retrieval"};
    app.require_subcommand(1);

    std::string spec_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate a synthetic multi-domain corpus");
    gen_corpus->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
    gen_corpus->add_option("--seed", seed, "Generator seed")->required();
    gen_corpus->add_option("--out", out_dir, "Output directory")->required();

    std::string corpus_dir;
    std::string scenario_arg;
    auto* gen_stream = app.add_subcommand("gen-stream", "Assign corpus queries and documents to sessions");
    gen_stream->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    gen_stream->add_option("--scenario", scenario_arg, "Scenario JSON, or one of D1, D2, D3, DD")->required();
    gen_stream->add_option("--seed", seed, "Sampling seed")->required();
    gen_stream->add_option("--out", out_dir, "Output directory")->required();

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run strategies over a stream and write report.json");
    add_run_options(run, run_args);
    run->add_option("--strategies", run_args.strategies, "Comma-separated strategy names (default: all)");

    RunArgs sweep_args;
    std::string axis;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "murr-cf ablation over replay count or alpha");
    add_run_options(sweep, sweep_args);
    sweep->add_option("--axis", axis, "replay or alpha")->required()->check(CLI::IsMember({"replay", "alpha"}));
    sweep->add_option("--values", values, "Comma-separated axis values")->required();

    std::string in_dir;
    std::string format = "markdown";
    auto* report = app.add_subcommand("report", "Render report.json as json, csv or markdown");
    report->add_option("--in", in_dir, "Directory holding report.json")->required();
    report->add_option("--format", format, "json, csv or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown", "md"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_corpus) {
            auto spec = murr::load_synthetic_spec(spec_path);
            auto corpus = murr::generate_synthetic_corpus(spec, seed);
            murr::write_corpus(corpus, out_dir);
            std::cout << "wrote " << corpus.documents().size() << " documents and " << corpus.queries().size()
                      << " queries to " << out_dir << '\n';
        } else if (*gen_stream) {
            auto corpus = murr::load_corpus_dir(corpus_dir);
            auto scenario = fs::exists(scenario_arg) ? murr::load_scenario(scenario_arg)
                                                     : murr::builtin_scenario(scenario_arg);
            auto stream = murr::build_stream(corpus, scenario, seed);
            murr::save_stream(stream, scenario, out_dir);
            std::cout << "wrote " << stream.n_sessions() << "-session stream to " << out_dir << '\n';
        } else if (*run) {
            auto [corpus, stream, config] = load_run_inputs(run_args);
            auto result = murr::run_experiment(corpus, stream, config);
            auto path = murr::write_report(result, murr::ReportFormat::Json, config.output_dir);
            std::cout << "wrote " << path.string() << '\n';
            for (auto const& r : result.runs) {
                if (!r.ok()) {
                    std::cerr << "run failed: " << murr::to_string(r.strategy) << " seed " << r.seed << ": "
                              << r.error << '\n';
                    return 2;
                }
            }
        } else if (*sweep) {
            auto [corpus, stream, config] = load_run_inputs(sweep_args);
            auto points = murr::sweep(corpus, stream, config, murr::parse_sweep_axis(axis), parse_doubles(values));
            nlohmann::json summary = nlohmann::json::array();
            for (auto const& p : points) {
                nlohmann::json finals = nlohmann::json::object();
                for (auto const& s : p.report.summaries) {
                    finals[std::string(murr::to_string(s.strategy))] = s.median_final_macro;
                }
                summary.push_back({{"value", p.value}, {"median_final_macro", finals}});
            }
            fs::create_directories(config.output_dir);
            write_text(config.output_dir / "sweep.json", summary.dump(1) + "\n");
            std::cout << "wrote " << points.size() << " sweep points under " << config.output_dir.string() << '\n';
        } else if (*report) {
            auto r = murr::load_report(fs::path(in_dir) / "report.json");
            auto path = murr::write_report(r, murr::parse_report_format(format), in_dir);
            std::cout << "wrote " << path.string() << '\n';
        }
    } catch (std::exception const& e) {
        std::cerr << "murr: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
