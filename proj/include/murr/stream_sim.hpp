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

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "murr/corpus.hpp"
#include "murr/error.hpp"
#include "murr/random.hpp"

namespace murr {

/// P(K = k) for K ~ BetaBinomial(n, alpha, beta), evaluated in log space.
[[nodiscard]] inline auto beta_binomial_pmf(int k, int n, double alpha, double beta) -> double {
    if (n < 0 || k < 0 || k > n) {
        throw std::domain_error("beta_binomial_pmf: k must lie in [0, n]");
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw std::domain_error("beta_binomial_pmf: alpha and beta must be positive");
    }
    auto lbeta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
    double const log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(log_choose + lbeta(k + alpha, n - k + beta) - lbeta(alpha, beta));
}

/// pmf restricted to sessions {0..t} and renormalized. Zero mass falls back to a point mass at t.
[[nodiscard]] inline auto truncated_pmf(std::vector<double> const& pmf, std::size_t t) -> std::vector<double> {
    if (t >= pmf.size()) {
        throw std::out_of_range("truncated_pmf: session index beyond the pmf");
    }
    std::vector<double> out(pmf.begin(), pmf.begin() + static_cast<std::ptrdiff_t>(t + 1));
    double mass = 0.0;
    for (double p : out) {
        mass += p;
    }
    if (!(mass > 0.0)) {
        warn("truncated_pmf: zero mass on sessions 0.." + std::to_string(t) + ", using a point mass at " +
             std::to_string(t));
        std::fill(out.begin(), out.end(), 0.0);
        out.back() = 1.0;
        return out;
    }
    for (double& p : out) {
        p /= mass;
    }
    return out;
}

struct BetaBinomialSchedule {
    double alpha = 1.0;
    double beta = 1.0;
};

struct ExplicitSchedule {
    std::vector<double> pmf;
};

struct DomainSchedule {
    std::string domain;
    std::variant<BetaBinomialSchedule, ExplicitSchedule> distribution;

    /// Session pmf over {0..n_sessions-1}.
    [[nodiscard]] auto pmf(std::size_t n_sessions) const -> std::vector<double> {
        if (auto const* bb = std::get_if<BetaBinomialSchedule>(&distribution)) {
            std::vector<double> out(n_sessions);
            int const n = static_cast<int>(n_sessions) - 1;
            for (int k = 0; k <= n; ++k) {
                out[static_cast<std::size_t>(k)] = beta_binomial_pmf(k, n, bb->alpha, bb->beta);
            }
            return out;
        }
        return std::get<ExplicitSchedule>(distribution).pmf;
    }
};

struct Scenario {
    std::string name;
    std::size_t n_sessions = 5;
    std::vector<DomainSchedule> schedules;
    /// Training domain per session.
    std::vector<std::string> emerging_domain;

    [[nodiscard]] auto schedule_for(std::string_view domain) const -> DomainSchedule const* {
        for (auto const& s : schedules) {
            if (s.domain == domain) {
                return &s;
            }
        }
        return nullptr;
    }

    void validate() const {
        if (n_sessions < 2) {
            throw ConfigError("scenario " + name + ": n_sessions must be >= 2");
        }
        if (schedules.empty()) {
            throw ConfigError("scenario " + name + ": schedules must be non-empty");
        }
        std::set<std::string> seen;
        for (auto const& s : schedules) {
            if (!seen.insert(s.domain).second) {
                throw ConfigError("scenario " + name + ": duplicate schedule for " + s.domain);
            }
            if (auto const* bb = std::get_if<BetaBinomialSchedule>(&s.distribution)) {
                if (!(bb->alpha > 0.0) || !(bb->beta > 0.0)) {
                    throw ConfigError("scenario " + name + ": schedules." + s.domain +
                                      ".beta_binomial alpha and beta must be positive");
                }
            } else {
                auto const& pmf = std::get<ExplicitSchedule>(s.distribution).pmf;
                if (pmf.size() != n_sessions) {
                    throw ConfigError("scenario " + name + ": schedules." + s.domain + ".explicit must have " +
                                      std::to_string(n_sessions) + " entries");
                }
                double total = 0.0;
                for (double p : pmf) {
                    if (!(p >= 0.0) || !std::isfinite(p)) {
                        throw ConfigError("scenario " + name + ": schedules." + s.domain +
                                          ".explicit has a negative or non-finite entry");
                    }
                    total += p;
                }
                if (std::abs(total - 1.0) > 1e-9) {
                    throw ConfigError("scenario " + name + ": schedules." + s.domain + ".explicit sums to " +
                                      std::to_string(total) + ", expected 1");
                }
            }
        }
        if (emerging_domain.size() != n_sessions) {
            throw ConfigError("scenario " + name + ": emerging_domain must list one domain per session");
        }
        for (auto const& d : emerging_domain) {
            if (seen.count(d) == 0) {
                throw ConfigError("scenario " + name + ": emerging domain " + d + " has no schedule");
            }
        }
    }
};

inline void to_json(nlohmann::json& j, Scenario const& s) {
    nlohmann::json schedules = nlohmann::json::object();
    for (auto const& sch : s.schedules) {
        if (auto const* bb = std::get_if<BetaBinomialSchedule>(&sch.distribution)) {
            schedules[sch.domain] = {{"beta_binomial", {{"alpha", bb->alpha}, {"beta", bb->beta}}}};
        } else {
            schedules[sch.domain] = {{"explicit", std::get<ExplicitSchedule>(sch.distribution).pmf}};
        }
    }
    j = nlohmann::json{{"name", s.name},
                       {"n_sessions", s.n_sessions},
                       {"schedules", schedules},
                       {"emerging_domain", s.emerging_domain}};
}

inline void from_json(nlohmann::json const& j, Scenario& s) {
    s = Scenario{};
    j.at("name").get_to(s.name);
    j.at("n_sessions").get_to(s.n_sessions);
    for (auto const& [domain, body] : j.at("schedules").items()) {
        DomainSchedule sch;
        sch.domain = domain;
        if (body.contains("beta_binomial")) {
            auto const& bb = body.at("beta_binomial");
            sch.distribution = BetaBinomialSchedule{bb.at("alpha").get<double>(), bb.at("beta").get<double>()};
        } else if (body.contains("explicit")) {
            sch.distribution = ExplicitSchedule{body.at("explicit").get<std::vector<double>>()};
        } else {
            throw ConfigError("scenario schedule for " + domain + " needs beta_binomial or explicit");
        }
        s.schedules.push_back(std::move(sch));
    }
    j.at("emerging_domain").get_to(s.emerging_domain);
}

[[nodiscard]] inline auto load_scenario(std::filesystem::path const& path) -> Scenario {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario: " + path.string());
    }
    try {
        auto s = nlohmann::json::parse(in).get<Scenario>();
        s.validate();
        return s;
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("scenario " + path.string() + ": " + e.what());
    }
}

/// Default domain order of the emerging-domain rotation.
inline std::vector<std::string> const kDefaultDomains = {"science", "recreation", "technology", "lifestyle",
                                                          "writing"};

/// Shipped scenarios. Shapes approximate the four simulated streams:
///   DD  one domain per session (point masses)
///   D2  a decay per domain, rotated so domain j peaks at session j and wraps around
///   D3  the same decay truncated at the end of the stream and renormalized
///   D1  technology peaks symmetrically at session 2, the rest are skewed beta-binomials
[[nodiscard]] inline auto builtin_scenario(std::string const& name,
                                           std::vector<std::string> const& domains = kDefaultDomains)
    -> Scenario {
    std::size_t const n = domains.size();
    Scenario s;
    s.name = name;
    s.n_sessions = n;
    s.emerging_domain = domains;
    std::vector<double> decay = {0.45, 0.25, 0.15, 0.10, 0.05};
    decay.resize(n, 0.05);
    {
        double total = 0.0;
        for (double d : decay) {
            total += d;
        }
        for (double& d : decay) {
            d /= total;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        DomainSchedule sch;
        sch.domain = domains[j];
        std::vector<double> pmf(n, 0.0);
        if (name == "DD") {
            pmf[j] = 1.0;
            sch.distribution = ExplicitSchedule{pmf};
        } else if (name == "D2") {
            for (std::size_t t = 0; t < n; ++t) {
                pmf[t] = decay[(t + n - j) % n];
            }
            sch.distribution = ExplicitSchedule{pmf};
        } else if (name == "D3") {
            double total = 0.0;
            for (std::size_t t = j; t < n; ++t) {
                pmf[t] = decay[t - j];
                total += pmf[t];
            }
            for (double& p : pmf) {
                p /= total;
            }
            sch.distribution = ExplicitSchedule{pmf};
        } else if (name == "D1") {
            static constexpr std::array<std::pair<double, double>, 5> kShapes = {
                {{1.0, 6.0}, {2.0, 4.0}, {4.0, 4.0}, {4.0, 2.0}, {6.0, 1.0}}};
            auto const [a, b] = kShapes[j % kShapes.size()];
            sch.distribution = BetaBinomialSchedule{a, b};
        } else {
            throw ConfigError("unknown builtin scenario: " + name);
        }
        s.schedules.push_back(std::move(sch));
    }
    s.validate();
    return s;
}

struct SessionData {
    std::vector<std::string> test_queries;
    std::vector<std::string> test_docs;
    std::vector<TripleIds> triples;

    auto operator==(SessionData const&) const -> bool = default;
};

/// Session assignment of test queries and documents plus per-session training triples.
struct Stream {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<SessionData> sessions;

    auto operator==(Stream const&) const -> bool = default;

    [[nodiscard]] auto n_sessions() const noexcept -> std::size_t { return sessions.size(); }

    [[nodiscard]] auto query_sessions() const -> std::unordered_map<std::string, std::size_t> {
        std::unordered_map<std::string, std::size_t> out;
        for (std::size_t s = 0; s < sessions.size(); ++s) {
            for (auto const& q : sessions[s].test_queries) {
                out.emplace(q, s);
            }
        }
        return out;
    }
    [[nodiscard]] auto doc_sessions() const -> std::unordered_map<std::string, std::size_t> {
        std::unordered_map<std::string, std::size_t> out;
        for (std::size_t s = 0; s < sessions.size(); ++s) {
            for (auto const& d : sessions[s].test_docs) {
                out.emplace(d, s);
            }
        }
        return out;
    }
};

/// Assigns every test query and test document of the scenario's domains to a session.
///
/// Queries draw from their domain pmf first. A document relevant to streamed queries then
/// draws from its domain pmf truncated at the earliest of those queries' sessions, so every
/// relevant document is indexed no later than its query is asked. Other documents draw from
/// the full pmf.
[[nodiscard]] inline auto build_stream(Corpus const& corpus, Scenario const& scenario, std::uint64_t seed) -> Stream {
    scenario.validate();
    for (auto const& sch : scenario.schedules) {
        if (!corpus.has_domain(sch.domain)) {
            throw ConfigError("scenario " + scenario.name + " references unknown domain " + sch.domain);
        }
    }
    std::size_t const n_sessions = scenario.n_sessions;
    std::map<std::string, std::vector<double>> pmfs;
    for (auto const& sch : scenario.schedules) {
        pmfs[sch.domain] = sch.pmf(n_sessions);
    }

    Stream stream;
    stream.scenario = scenario.name;
    stream.seed = seed;
    stream.sessions.resize(n_sessions);

    Rng query_rng(derive_seed(seed, "stream-queries"));
    std::unordered_map<std::string, std::size_t> earliest;
    for (auto const& q : corpus.queries()) {
        if (q.split != Split::Test) {
            continue;
        }
        auto it = pmfs.find(q.domain);
        if (it == pmfs.end()) {
            continue;
        }
        auto const s = query_rng.categorical(it->second);
        stream.sessions[s].test_queries.push_back(q.id);
        for (auto const& did : corpus.relevant(q.id)) {
            auto [pos, inserted] = earliest.emplace(did, s);
            if (!inserted && s < pos->second) {
                pos->second = s;
            }
        }
    }

    Rng doc_rng(derive_seed(seed, "stream-docs"));
    for (auto const& d : corpus.documents()) {
        if (d.split != Split::Test) {
            continue;
        }
        auto pmf_it = pmfs.find(d.domain);
        auto const bound = earliest.find(d.id);
        if (pmf_it == pmfs.end()) {
            if (bound != earliest.end()) {
                throw ConfigError("document " + d.id + " is relevant to a streamed query but its domain " + d.domain +
                                  " has no schedule");
            }
            continue;
        }
        std::size_t s = 0;
        if (bound != earliest.end()) {
            s = doc_rng.categorical(truncated_pmf(pmf_it->second, bound->second));
        } else {
            s = doc_rng.categorical(pmf_it->second);
        }
        stream.sessions[s].test_docs.push_back(d.id);
    }

    for (std::size_t s = 0; s < n_sessions; ++s) {
        stream.sessions[s].triples =
            make_training_triples(corpus, scenario.emerging_domain[s], derive_seed(seed, "session-triples", s));
    }
    return stream;
}

inline void to_json(nlohmann::json& j, Stream const& stream) {
    nlohmann::json sessions = nlohmann::json::array();
    for (auto const& s : stream.sessions) {
        nlohmann::json triples = nlohmann::json::array();
        for (auto const& t : s.triples) {
            triples.push_back({t.query_id, t.pos_doc_id, t.neg_doc_id});
        }
        sessions.push_back({{"test_queries", s.test_queries}, {"test_docs", s.test_docs}, {"triples", triples}});
    }
    j = nlohmann::json{{"scenario", stream.scenario}, {"seed", stream.seed}, {"sessions", sessions}};
}

inline void from_json(nlohmann::json const& j, Stream& stream) {
    stream = Stream{};
    j.at("scenario").get_to(stream.scenario);
    j.at("seed").get_to(stream.seed);
    for (auto const& body : j.at("sessions")) {
        SessionData s;
        body.at("test_queries").get_to(s.test_queries);
        body.at("test_docs").get_to(s.test_docs);
        for (auto const& t : body.at("triples")) {
            s.triples.push_back(TripleIds{t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                                          t.at(2).get<std::string>()});
        }
        stream.sessions.push_back(std::move(s));
    }
}

inline void save_stream(Stream const& stream, Scenario const& scenario, std::filesystem::path const& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "stream.json", std::ios::trunc) << nlohmann::json(stream).dump(1) << '\n';
    std::ofstream(dir / "scenario.json", std::ios::trunc) << nlohmann::json(scenario).dump(2) << '\n';
}

[[nodiscard]] inline auto load_stream(std::filesystem::path const& dir) -> Stream {
    std::ifstream in(dir / "stream.json");
    if (!in) {
        throw ConfigError("cannot open " + (dir / "stream.json").string());
    }
    try {
        return nlohmann::json::parse(in).get<Stream>();
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("stream " + dir.string() + ": " + e.what());
    }
}

}  // namespace murr
