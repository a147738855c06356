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

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "murr/corpus.hpp"
#include "murr/encoder.hpp"
#include "murr/error.hpp"
#include "murr/evalkit.hpp"
#include "murr/random.hpp"
#include "murr/stream_sim.hpp"
#include "murr/trainer.hpp"
#include "murr/vindex.hpp"

namespace murr {

/// Worker cap from MURR_THREADS (default 1, invalid values ignored).
[[nodiscard]] inline auto threads_from_env() -> std::size_t {
    char const* raw = std::getenv("MURR_THREADS");
    if (raw == nullptr) {
        return 1;
    }
    try {
        long const v = std::stol(raw);
        return v >= 1 ? static_cast<std::size_t>(v) : 1;
    } catch (std::exception const&) {
        warn(std::string("ignoring invalid MURR_THREADS=") + raw);
        return 1;
    }
}

struct ExperimentConfig {
    std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    TrainConfig train;
    TrainConfig pretrain;
    /// Corpus domains whose train split forms the generic pretraining set for the base model.
    std::vector<std::string> pretrain_domains;
    EncoderDims encoder;
    IndexMode index_mode = IndexMode::Flat;
    std::uint32_t pq_m = 8;
    std::int64_t k = 100;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    /// Checkpoints, shards and replay buffers go under this directory after every session
    /// when non-empty.
    std::filesystem::path output_dir;
    bool resume = false;
    std::size_t threads = 1;

    void validate() const {
        if (strategies.empty()) {
            throw ConfigError("experiment: at least one strategy is required");
        }
        if (seeds.empty()) {
            throw ConfigError("experiment: at least one seed is required");
        }
        if (k <= 0) {
            throw ConfigError("experiment: k must be positive");
        }
        if (index_mode == IndexMode::PQ && (pq_m == 0 || encoder.out % pq_m != 0)) {
            throw ConfigError("experiment: pq_m must divide the encoder output dimension");
        }
        train.validate();
        pretrain.validate();
    }
};

inline void to_json(nlohmann::json& j, ExperimentConfig const& c) {
    std::vector<std::string> strategies;
    for (auto s : c.strategies) {
        strategies.emplace_back(to_string(s));
    }
    j = nlohmann::json{
        {"strategies", strategies},
        {"train", c.train},
        {"pretrain", c.pretrain},
        {"pretrain_domains", c.pretrain_domains},
        {"encoder",
         {{"vocab", c.encoder.vocab}, {"emb", c.encoder.emb}, {"hidden", c.encoder.hidden}, {"out", c.encoder.out}}},
        {"index", {{"mode", c.index_mode == IndexMode::Flat ? "flat" : "pq"}, {"pq_m", c.pq_m}}},
        {"k", c.k},
        {"seeds", c.seeds}};
}

inline void from_json(nlohmann::json const& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    if (j.contains("strategies")) {
        c.strategies.clear();
        for (auto const& s : j.at("strategies")) {
            c.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
    }
    if (j.contains("train")) {
        j.at("train").get_to(c.train);
    }
    if (j.contains("pretrain")) {
        j.at("pretrain").get_to(c.pretrain);
    }
    if (j.contains("pretrain_domains")) {
        j.at("pretrain_domains").get_to(c.pretrain_domains);
    }
    if (j.contains("encoder")) {
        auto const& e = j.at("encoder");
        c.encoder.vocab = e.value("vocab", c.encoder.vocab);
        c.encoder.emb = e.value("emb", c.encoder.emb);
        c.encoder.hidden = e.value("hidden", c.encoder.hidden);
        c.encoder.out = e.value("out", c.encoder.out);
    }
    if (j.contains("index")) {
        auto const& ix = j.at("index");
        auto const mode = ix.value("mode", std::string("flat"));
        if (mode == "flat") {
            c.index_mode = IndexMode::Flat;
        } else if (mode == "pq") {
            c.index_mode = IndexMode::PQ;
        } else {
            throw ConfigError("index.mode must be flat or pq");
        }
        c.pq_m = ix.value("pq_m", c.pq_m);
    }
    if (j.contains("k")) {
        j.at("k").get_to(c.k);
    }
    if (j.contains("seeds")) {
        j.at("seeds").get_to(c.seeds);
    }
}

[[nodiscard]] inline auto load_experiment_config(std::filesystem::path const& path) -> ExperimentConfig {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open experiment config: " + path.string());
    }
    try {
        auto c = nlohmann::json::parse(in).get<ExperimentConfig>();
        c.validate();
        return c;
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("experiment config " + path.string() + ": " + e.what());
    }
}

/// Outcome of one (strategy, seed) pass over the stream.
struct StrategyRun {
    Strategy strategy = Strategy::SameModel;
    std::uint64_t seed = 0;
    /// Cells in (session, query set) order.
    std::vector<EvalCell> cells;
    SuccessGrid grid;
    /// Per session s: macro average over query sets 0..s (non-empty sets only).
    std::vector<double> session_macro;
    double macro = 0.0;
    double final_macro = 0.0;
    std::optional<RelativeGain> gain;
    std::size_t training_invocations = 0;
    std::size_t shard_count = 0;
    std::size_t docs_indexed = 0;
    std::size_t max_encodes_per_doc = 0;
    std::string error;

    [[nodiscard]] auto ok() const noexcept -> bool { return error.empty(); }
};

struct StrategySummary {
    Strategy strategy = Strategy::SameModel;
    std::size_t runs_ok = 0;
    double median_macro = 0.0;
    double median_final_macro = 0.0;
    double median_gain_mean = 0.0;
    double median_gain_std = 0.0;
};

struct SignificanceResult {
    Strategy a = Strategy::SameModel;
    Strategy b = Strategy::SameModel;
    std::size_t pairs = 0;
    TTestResult test;
};

struct MetricsReport {
    std::string scenario;
    std::size_t n_sessions = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<Strategy> strategies;
    std::vector<StrategyRun> runs;
    std::vector<StrategySummary> summaries;
    std::vector<SignificanceResult> significance;

    [[nodiscard]] auto summary(Strategy s) const -> StrategySummary const& {
        for (auto const& x : summaries) {
            if (x.strategy == s) {
                return x;
            }
        }
        throw std::out_of_range("no summary for strategy " + std::string(to_string(s)));
    }
    [[nodiscard]] auto run(Strategy s, std::uint64_t seed) const -> StrategyRun const& {
        for (auto const& r : runs) {
            if (r.strategy == s && r.seed == seed) {
                return r;
            }
        }
        throw std::out_of_range("no run for strategy " + std::string(to_string(s)));
    }
};

namespace detail {
    struct SessionInputs {
        std::vector<TrainingTriple> triples;
        std::vector<Document const*> docs;
        std::vector<Query const*> queries;
    };

    inline auto session_dir(std::filesystem::path const& out, std::uint64_t seed, Strategy strategy, std::size_t s)
        -> std::filesystem::path {
        return out / ("seed-" + std::to_string(seed)) / std::string(to_string(strategy)) /
               ("session-" + std::to_string(s));
    }

    inline auto cells_to_json(std::vector<EvalCell> const& cells, bool trained) -> nlohmann::json {
        nlohmann::json arr = nlohmann::json::array();
        for (auto const& c : cells) {
            arr.push_back({{"query_set", c.query_set},
                           {"session", c.session},
                           {"query_ids", c.query_ids},
                           {"values", c.values},
                           {"mean", c.mean}});
        }
        return {{"trained", trained}, {"cells", arr}};
    }

    inline auto cell_from_json(nlohmann::json const& j) -> EvalCell {
        EvalCell c;
        j.at("query_set").get_to(c.query_set);
        j.at("session").get_to(c.session);
        j.at("query_ids").get_to(c.query_ids);
        j.at("values").get_to(c.values);
        c.finalize();
        return c;
    }

    /// Fills grid, macro averages and gain from the cells.
    inline void summarize_run(StrategyRun& run, std::size_t n_sessions) {
        run.grid.assign(n_sessions, std::vector<double>(n_sessions, 0.0));
        run.session_macro.assign(n_sessions, 0.0);
        std::vector<double> all;
        std::vector<std::vector<double>> per_session(n_sessions);
        for (auto const& c : run.cells) {
            run.grid[c.query_set][c.session] = c.mean;
            if (!c.values.empty()) {
                all.push_back(c.mean);
                per_session[c.session].push_back(c.mean);
            }
        }
        for (std::size_t s = 0; s < n_sessions; ++s) {
            run.session_macro[s] = per_session[s].empty() ? 0.0 : macro_average(per_session[s]);
        }
        run.macro = all.empty() ? 0.0 : macro_average(all);
        run.final_macro = run.session_macro.back();
        try {
            run.gain = relative_gain(run.grid);
        } catch (UndefinedMetricError const&) {
            run.gain.reset();
        }
    }

    inline void run_strategy(Corpus const& corpus, std::vector<SessionInputs> const& sessions,
                             ExperimentConfig const& config, std::uint64_t seed, Strategy strategy,
                             EncoderModel const& base, std::optional<EncoderModel>& shared_session0,
                             TrainConfig const& train, StrategyRun& run) {
        std::size_t const n_sessions = sessions.size();
        bool const persist = !config.output_dir.empty();
        EncoderModel model = base;
        ReplaySet replay(train.replay_k);
        std::vector<IndexShard> shards;
        shards.reserve(n_sessions);
        std::unordered_map<std::string, std::size_t> encodes;
        std::uint32_t const d_out = base.dims().out;

        for (std::size_t s = 0; s < n_sessions; ++s) {
            auto const& in = sessions[s];
            auto const dir = persist ? session_dir(config.output_dir, seed, strategy, s) : std::filesystem::path{};
            bool const resumable = persist && config.resume && std::filesystem::exists(dir / "cells.json") &&
                                   std::filesystem::exists(dir / "model.bin") &&
                                   std::filesystem::exists(dir / "shard.bin") &&
                                   std::filesystem::exists(dir / "replay.bin");
            if (resumable) {
                model = load_model(dir / "model.bin");
                replay.add(load_replay(dir / "replay.bin"));
                shards.push_back(load_shard(dir / "shard.bin"));
                std::ifstream cin(dir / "cells.json");
                auto const j = nlohmann::json::parse(cin);
                if (j.at("trained").get<bool>()) {
                    ++run.training_invocations;
                }
                for (auto const& cj : j.at("cells")) {
                    run.cells.push_back(cell_from_json(cj));
                }
                run.docs_indexed += shards.back().size();
                for (auto const& id : shards.back().doc_ids()) {
                    ++encodes[id];
                }
                continue;
            }

            // (1) train M_s
            bool trained = false;
            if (s == 0) {
                if (!shared_session0) {
                    shared_session0 = train_session(Strategy::MurrCF, base, base, in.triples, {}, train, 0);
                }
                model = *shared_session0;
                trained = true;
            } else if (strategy != Strategy::SameModel) {
                model = train_session(strategy, model, base, in.triples, replay.items(), train, s);
                trained = true;
            }
            if (trained) {
                ++run.training_invocations;
            }

            // (2) retain replay triples with anchors from M_s
            auto sampled =
                sample_replay(in.triples, model, train.replay_k, derive_seed(seed, "replay-sample", train.seed),
                              static_cast<std::uint32_t>(s));
            if (persist) {
                std::filesystem::create_directories(dir);
                save_replay(sampled, d_out, dir / "replay.bin");
            }
            replay.add(std::move(sampled));

            // (3) index session documents with M_s; never revisited afterwards
            std::vector<std::string> ids;
            std::vector<double> vectors;
            ids.reserve(in.docs.size());
            vectors.reserve(in.docs.size() * d_out);
            for (auto const* d : in.docs) {
                ++encodes[d->id];
                ids.push_back(d->id);
                auto v = encode(model, d->text);
                vectors.insert(vectors.end(), v.begin(), v.end());
            }
            run.docs_indexed += ids.size();
            if (ids.empty()) {
                shards.push_back(IndexShard::from_vectors({}, {}, d_out, IndexMode::Flat, config.pq_m, 0,
                                                          static_cast<std::uint32_t>(s), model.version()));
            } else {
                shards.push_back(IndexShard::from_vectors(std::move(ids), std::move(vectors), d_out, config.index_mode,
                                                          config.pq_m, derive_seed(seed, "pq", s),
                                                          static_cast<std::uint32_t>(s), model.version()));
            }

            // (4) evaluate query sets 0..s with M_s against shards 0..s
            std::vector<IndexShard const*> live;
            for (auto const& sh : shards) {
                live.push_back(&sh);
            }
            std::vector<EvalCell> session_cells;
            for (std::size_t i = 0; i <= s; ++i) {
                EvalCell cell;
                cell.query_set = i;
                cell.session = s;
                for (auto const* q : sessions[i].queries) {
                    auto const qvec = encode(model, q->text);
                    auto const ranked = search_all(live, qvec, config.k);
                    cell.query_ids.push_back(q->id);
                    cell.values.push_back(static_cast<std::uint8_t>(success_at_5(ranked, corpus.relevant(q->id))));
                }
                cell.finalize();
                session_cells.push_back(std::move(cell));
            }
            if (persist) {
                save_model(model, dir / "model.bin");
                save_shard(shards.back(), dir / "shard.bin");
                std::ofstream(dir / "cells.json", std::ios::trunc)
                    << cells_to_json(session_cells, trained).dump() << '\n';
            }
            run.cells.insert(run.cells.end(), std::make_move_iterator(session_cells.begin()),
                             std::make_move_iterator(session_cells.end()));
        }
        run.shard_count = shards.size();
        for (auto const& [id, count] : encodes) {
            run.max_encodes_per_doc = std::max(run.max_encodes_per_doc, count);
        }
        summarize_run(run, n_sessions);
    }

    inline auto run_seed(Corpus const& corpus, std::vector<SessionInputs> const& sessions,
                         ExperimentConfig const& config, std::uint64_t seed) -> std::vector<StrategyRun> {
        std::vector<StrategyRun> runs(config.strategies.size());
        for (std::size_t i = 0; i < runs.size(); ++i) {
            runs[i].strategy = config.strategies[i];
            runs[i].seed = seed;
        }
        TrainConfig train = config.train;
        train.seed = derive_seed(seed, "train", config.train.seed);
        TrainConfig pre = config.pretrain;
        pre.seed = derive_seed(seed, "pretrain", config.pretrain.seed);

        std::optional<EncoderModel> base;
        try {
            std::vector<TrainingTriple> generic;
            for (std::size_t d = 0; d < config.pretrain_domains.size(); ++d) {
                auto ids = make_training_triples(corpus, config.pretrain_domains[d],
                                                 derive_seed(seed, "pretrain-triples", d));
                auto resolved = resolve_triples(corpus, ids);
                generic.insert(generic.end(), resolved.begin(), resolved.end());
            }
            base = pretrain_base(generic, pre, config.encoder);
            if (!config.output_dir.empty()) {
                auto const dir = config.output_dir / ("seed-" + std::to_string(seed));
                std::filesystem::create_directories(dir);
                save_model(*base, dir / "base.bin");
            }
        } catch (std::exception const& e) {
            for (auto& r : runs) {
                r.error = std::string("base model: ") + e.what();
            }
            return runs;
        }

        std::optional<EncoderModel> session0;
        for (auto& run : runs) {
            try {
                run_strategy(corpus, sessions, config, seed, run.strategy, *base, session0, train, run);
            } catch (std::exception const& e) {
                run.error = e.what();
                warn("run " + std::string(to_string(run.strategy)) + " seed " + std::to_string(seed) +
                     " aborted: " + e.what());
            }
        }
        return runs;
    }

    /// Per-(seed, session, query) Success@5 values in a canonical order, for pairing strategies.
    inline auto paired_values(StrategyRun const& run) -> std::vector<double> {
        std::vector<double> out;
        for (auto const& c : run.cells) {
            for (auto v : c.values) {
                out.push_back(v);
            }
        }
        return out;
    }
}  // namespace detail

/// Recomputes per-strategy medians and pairwise paired t-tests from the runs.
inline void finalize_report(MetricsReport& report) {
    report.summaries.clear();
    report.significance.clear();
    for (auto s : report.strategies) {
        StrategySummary sum;
        sum.strategy = s;
        std::vector<double> macro;
        std::vector<double> final_macro;
        std::vector<double> gain_mean;
        std::vector<double> gain_std;
        for (auto const& r : report.runs) {
            if (r.strategy != s || !r.ok()) {
                continue;
            }
            ++sum.runs_ok;
            macro.push_back(r.macro);
            final_macro.push_back(r.final_macro);
            if (r.gain) {
                gain_mean.push_back(r.gain->mean);
                gain_std.push_back(r.gain->std);
            }
        }
        if (!macro.empty()) {
            sum.median_macro = median_of(macro);
            sum.median_final_macro = median_of(final_macro);
        }
        if (!gain_mean.empty()) {
            sum.median_gain_mean = median_of(gain_mean);
            sum.median_gain_std = median_of(gain_std);
        }
        report.summaries.push_back(sum);
    }
    for (std::size_t a = 0; a < report.strategies.size(); ++a) {
        for (std::size_t b = a + 1; b < report.strategies.size(); ++b) {
            std::vector<double> va;
            std::vector<double> vb;
            for (auto seed : report.seeds) {
                StrategyRun const* ra = nullptr;
                StrategyRun const* rb = nullptr;
                for (auto const& r : report.runs) {
                    if (r.seed == seed && r.strategy == report.strategies[a]) {
                        ra = &r;
                    }
                    if (r.seed == seed && r.strategy == report.strategies[b]) {
                        rb = &r;
                    }
                }
                if (ra == nullptr || rb == nullptr || !ra->ok() || !rb->ok()) {
                    continue;
                }
                auto xa = detail::paired_values(*ra);
                auto xb = detail::paired_values(*rb);
                va.insert(va.end(), xa.begin(), xa.end());
                vb.insert(vb.end(), xb.begin(), xb.end());
            }
            SignificanceResult sig;
            sig.a = report.strategies[a];
            sig.b = report.strategies[b];
            sig.pairs = va.size();
            if (va.size() >= 2 && va.size() == vb.size()) {
                sig.test = paired_t_test(va, vb);
            }
            report.significance.push_back(sig);
        }
    }
}

/// Runs every configured strategy and seed over the stream, session by session.
[[nodiscard]] inline auto run_experiment(Corpus const& corpus, Stream const& stream, ExperimentConfig const& config)
    -> MetricsReport {
    config.validate();
    if (stream.n_sessions() < 2) {
        throw ConfigError("experiment: stream needs at least two sessions");
    }
    std::vector<detail::SessionInputs> sessions(stream.n_sessions());
    for (std::size_t s = 0; s < stream.n_sessions(); ++s) {
        auto const& sd = stream.sessions[s];
        sessions[s].triples = resolve_triples(corpus, sd.triples);
        for (auto const& id : sd.test_docs) {
            sessions[s].docs.push_back(&corpus.document(id));
        }
        for (auto const& id : sd.test_queries) {
            sessions[s].queries.push_back(&corpus.query(id));
        }
    }

    MetricsReport report;
    report.scenario = stream.scenario;
    report.n_sessions = stream.n_sessions();
    report.seeds = config.seeds;
    report.strategies = config.strategies;

    std::vector<std::vector<StrategyRun>> per_seed(config.seeds.size());
    std::size_t const workers = std::max<std::size_t>(1, std::min(config.threads, config.seeds.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i) {
            per_seed[i] = detail::run_seed(corpus, sessions, config, config.seeds[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
                    per_seed[i] = detail::run_seed(corpus, sessions, config, config.seeds[i]);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& runs : per_seed) {
        for (auto& r : runs) {
            report.runs.push_back(std::move(r));
        }
    }
    finalize_report(report);
    return report;
}

enum class SweepAxis : std::uint8_t { ReplayK, Alpha };

[[nodiscard]] inline auto parse_sweep_axis(std::string_view text) -> SweepAxis {
    if (text == "replay") {
        return SweepAxis::ReplayK;
    }
    if (text == "alpha") {
        return SweepAxis::Alpha;
    }
    throw ConfigError("sweep axis must be replay or alpha");
}

struct SweepPoint {
    double value = 0.0;
    MetricsReport report;
};

/// One murr-cf experiment per axis value with shared seeds.
[[nodiscard]] inline auto sweep(Corpus const& corpus, Stream const& stream, ExperimentConfig const& config,
                                SweepAxis axis, std::vector<double> const& values) -> std::vector<SweepPoint> {
    if (values.empty()) {
        throw ConfigError("sweep: no axis values");
    }
    std::vector<SweepPoint> out;
    for (double v : values) {
        ExperimentConfig c = config;
        c.strategies = {Strategy::MurrCF};
        std::string label;
        if (axis == SweepAxis::ReplayK) {
            if (v < 0.0 || v != std::floor(v)) {
                throw ConfigError("sweep: replay counts must be non-negative integers");
            }
            c.train.replay_k = static_cast<std::size_t>(v);
            label = "replay-" + std::to_string(c.train.replay_k);
        } else {
            if (!(v >= 0.0)) {
                throw ConfigError("sweep: alpha must be >= 0");
            }
            c.train.alpha = v;
            label = "alpha-" + nlohmann::json(v).dump();
        }
        if (!config.output_dir.empty()) {
            c.output_dir = config.output_dir / label;
        }
        out.push_back(SweepPoint{v, run_experiment(corpus, stream, c)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, MetricsReport const& r) {
    std::vector<std::string> strategies;
    for (auto s : r.strategies) {
        strategies.emplace_back(to_string(s));
    }
    nlohmann::json runs = nlohmann::json::array();
    for (auto const& run : r.runs) {
        nlohmann::json cells = nlohmann::json::array();
        for (auto const& c : run.cells) {
            cells.push_back({{"query_set", c.query_set},
                             {"session", c.session},
                             {"n_queries", c.values.size()},
                             {"success_at_5", c.mean},
                             {"query_ids", c.query_ids},
                             {"values", c.values}});
        }
        nlohmann::json gain = nullptr;
        if (run.gain) {
            nlohmann::json terms = nlohmann::json::array();
            for (auto const& t : run.gain->terms) {
                terms.push_back({{"query_set", t.query_set}, {"session", t.session}, {"value", t.value}});
            }
            gain = {{"mean", run.gain->mean},
                    {"std", run.gain->std},
                    {"terms", terms},
                    {"excluded", run.gain->excluded}};
        }
        runs.push_back({{"strategy", to_string(run.strategy)},
                        {"seed", run.seed},
                        {"error", run.error},
                        {"macro", run.macro},
                        {"final_macro", run.final_macro},
                        {"session_macro", run.session_macro},
                        {"grid", run.grid},
                        {"gain", gain},
                        {"diagnostics",
                         {{"training_invocations", run.training_invocations},
                          {"shard_count", run.shard_count},
                          {"docs_indexed", run.docs_indexed},
                          {"max_encodes_per_doc", run.max_encodes_per_doc}}},
                        {"cells", cells}});
    }
    nlohmann::json summaries = nlohmann::json::array();
    for (auto const& s : r.summaries) {
        summaries.push_back({{"strategy", to_string(s.strategy)},
                             {"runs_ok", s.runs_ok},
                             {"median_macro", s.median_macro},
                             {"median_final_macro", s.median_final_macro},
                             {"median_gain_mean", s.median_gain_mean},
                             {"median_gain_std", s.median_gain_std}});
    }
    nlohmann::json sig = nlohmann::json::array();
    for (auto const& s : r.significance) {
        sig.push_back({{"a", to_string(s.a)},
                       {"b", to_string(s.b)},
                       {"pairs", s.pairs},
                       {"t", std::isfinite(s.test.t) ? nlohmann::json(s.test.t)
                                                     : nlohmann::json(s.test.t > 0 ? "inf" : "-inf")},
                       {"df", s.test.df},
                       {"p", s.test.p},
                       {"significant", s.test.significant()}});
    }
    j = nlohmann::json{{"scenario", r.scenario},       {"n_sessions", r.n_sessions}, {"seeds", r.seeds},
                       {"strategies", strategies},     {"summaries", summaries},     {"significance", sig},
                       {"runs", runs}};
}

inline void from_json(nlohmann::json const& j, MetricsReport& r) {
    r = MetricsReport{};
    j.at("scenario").get_to(r.scenario);
    j.at("n_sessions").get_to(r.n_sessions);
    j.at("seeds").get_to(r.seeds);
    for (auto const& s : j.at("strategies")) {
        r.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    for (auto const& rj : j.at("runs")) {
        StrategyRun run;
        run.strategy = parse_strategy(rj.at("strategy").get<std::string>());
        rj.at("seed").get_to(run.seed);
        rj.at("error").get_to(run.error);
        auto const& diag = rj.at("diagnostics");
        diag.at("training_invocations").get_to(run.training_invocations);
        diag.at("shard_count").get_to(run.shard_count);
        diag.at("docs_indexed").get_to(run.docs_indexed);
        diag.at("max_encodes_per_doc").get_to(run.max_encodes_per_doc);
        for (auto const& cj : rj.at("cells")) {
            run.cells.push_back(detail::cell_from_json(cj));
        }
        if (run.ok()) {
            detail::summarize_run(run, r.n_sessions);
        }
        r.runs.push_back(std::move(run));
    }
    finalize_report(r);
}

[[nodiscard]] inline auto load_report(std::filesystem::path const& path) -> MetricsReport {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open report: " + path.string());
    }
    return nlohmann::json::parse(in).get<MetricsReport>();
}

/// Gain cell as "mean (std)", e.g. "-0.013 (0.07)".
[[nodiscard]] inline auto format_gain_cell(double mean, double std) -> std::string {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f (%.2f)", mean, std);
    return buf;
}

[[nodiscard]] inline auto format_number(double v) -> std::string { return nlohmann::json(v).dump(); }

[[nodiscard]] inline auto report_json(MetricsReport const& r) -> std::string {
    return nlohmann::json(r).dump(1) + "\n";
}

/// One row per (strategy, scenario, seed, query set, session).
[[nodiscard]] inline auto report_csv(MetricsReport const& r) -> std::string {
    std::ostringstream out;
    out << "strategy,scenario,seed,query_set,session,n_queries,success_at_5\n";
    for (auto const& run : r.runs) {
        for (auto const& c : run.cells) {
            out << to_string(run.strategy) << ',' << r.scenario << ',' << run.seed << ',' << c.query_set << ','
                << c.session << ',' << c.values.size() << ',' << format_number(c.mean) << '\n';
        }
    }
    return out.str();
}

[[nodiscard]] inline auto report_markdown(MetricsReport const& r) -> std::string {
    std::ostringstream out;
    auto fixed = [](double v, int digits) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", digits, v);
        return std::string(buf);
    };
    out << "# Scenario " << r.scenario << "\n\n";
    out << "Medians over " << r.seeds.size() << " seed(s).\n\n";
    out << "## Success@5 by session (macro over query sets)\n\n| Strategy | macro |";
    for (std::size_t s = 0; s < r.n_sessions; ++s) {
        out << " S" << s << " |";
    }
    out << "\n|---|---|";
    for (std::size_t s = 0; s < r.n_sessions; ++s) {
        out << "---|";
    }
    out << '\n';
    for (auto const& sum : r.summaries) {
        out << "| " << to_string(sum.strategy) << " | " << fixed(sum.median_macro, 3) << " |";
        for (std::size_t s = 0; s < r.n_sessions; ++s) {
            std::vector<double> vals;
            for (auto const& run : r.runs) {
                if (run.strategy == sum.strategy && run.ok()) {
                    vals.push_back(run.session_macro[s]);
                }
            }
            out << ' ' << (vals.empty() ? std::string("-") : fixed(median_of(vals), 3)) << " |";
        }
        out << '\n';
    }
    out << "\n## Relative Success@5 gain, mean (std)\n\n| Strategy | gain |\n|---|---|\n";
    for (auto const& sum : r.summaries) {
        out << "| " << to_string(sum.strategy) << " | " << format_gain_cell(sum.median_gain_mean, sum.median_gain_std)
            << " |\n";
    }
    if (!r.significance.empty()) {
        out << "\n## Paired t-test p-values\n\n| |";
        for (auto s : r.strategies) {
            out << ' ' << to_string(s) << " |";
        }
        out << "\n|---|";
        for (std::size_t i = 0; i < r.strategies.size(); ++i) {
            out << "---|";
        }
        out << '\n';
        for (auto a : r.strategies) {
            out << "| " << to_string(a) << " |";
            for (auto b : r.strategies) {
                std::string cell = "-";
                for (auto const& sig : r.significance) {
                    if ((sig.a == a && sig.b == b) || (sig.a == b && sig.b == a)) {
                        cell = fixed(sig.test.p, 4) + (sig.test.significant() ? "*" : "");
                    }
                }
                out << ' ' << cell << " |";
            }
            out << '\n';
        }
        out << "\n`*` p < 0.05\n";
    }
    std::vector<std::string> failures;
    for (auto const& run : r.runs) {
        if (!run.ok()) {
            failures.push_back(std::string(to_string(run.strategy)) + " seed " + std::to_string(run.seed) + ": " +
                               run.error);
        }
    }
    if (!failures.empty()) {
        out << "\n## Failed runs\n\n";
        for (auto const& f : failures) {
            out << "- " << f << '\n';
        }
    }
    return out.str();
}

enum class ReportFormat : std::uint8_t { Json, Csv, Markdown };

[[nodiscard]] inline auto parse_report_format(std::string_view text) -> ReportFormat {
    if (text == "json") {
        return ReportFormat::Json;
    }
    if (text == "csv") {
        return ReportFormat::Csv;
    }
    if (text == "markdown" || text == "md") {
        return ReportFormat::Markdown;
    }
    throw ConfigError("report format must be json, csv or markdown");
}

/// Writes report.{json,csv,md} for the given format into dir; returns the written path.
inline auto write_report(MetricsReport const& r, ReportFormat format, std::filesystem::path const& dir)
    -> std::filesystem::path {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::filesystem::path path;
    std::string body;
    switch (format) {
        case ReportFormat::Json:
            path = dir / "report.json";
            body = report_json(r);
            break;
        case ReportFormat::Csv:
            path = dir / "report.csv";
            body = report_csv(r);
            break;
        case ReportFormat::Markdown:
            path = dir / "report.md";
            body = report_markdown(r);
            break;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << body;
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
    return path;
}

}  // namespace murr
