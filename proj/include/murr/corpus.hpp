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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "murr/error.hpp"
#include "murr/random.hpp"

namespace murr {

enum class Split : std::uint8_t { Train, Test };

[[nodiscard]] inline auto to_string(Split split) -> std::string_view {
    return split == Split::Train ? "train" : "test";
}

[[nodiscard]] inline auto parse_split(std::string_view text) -> std::optional<Split> {
    if (text == "train") {
        return Split::Train;
    }
    if (text == "test") {
        return Split::Test;
    }
    return std::nullopt;
}

struct Document {
    std::string id;
    std::string text;
    std::string domain;
    Split split = Split::Test;

    auto operator==(Document const&) const -> bool = default;
};

struct Query {
    std::string id;
    std::string text;
    std::string domain;
    Split split = Split::Test;

    auto operator==(Query const&) const -> bool = default;
};

/// query id -> relevant doc ids. Ordered containers keep every derived artifact deterministic.
using Qrels = std::map<std::string, std::set<std::string>>;

/// Immutable multi-domain retrieval collection with a train/test partition.
class Corpus {
  public:
    Corpus() = default;

    /// Validates and takes ownership. Throws ValidationError on any structural violation:
    /// duplicate ids, empty text, unknown domain, dangling or cross-split qrels, empty relevance sets,
    /// or a query without a relevance set.
    static auto create(std::vector<std::string> domains,
                       std::vector<Document> documents,
                       std::vector<Query> queries,
                       Qrels qrels) -> Corpus {
        Corpus c;
        c.m_domains = std::move(domains);
        c.m_documents = std::move(documents);
        c.m_queries = std::move(queries);
        c.m_qrels = std::move(qrels);
        c.validate_and_index();
        return c;
    }

    [[nodiscard]] auto domains() const noexcept -> std::vector<std::string> const& { return m_domains; }
    [[nodiscard]] auto documents() const noexcept -> std::vector<Document> const& { return m_documents; }
    [[nodiscard]] auto queries() const noexcept -> std::vector<Query> const& { return m_queries; }
    [[nodiscard]] auto qrels() const noexcept -> Qrels const& { return m_qrels; }

    [[nodiscard]] auto has_domain(std::string_view domain) const -> bool {
        return std::find(m_domains.begin(), m_domains.end(), domain) != m_domains.end();
    }

    [[nodiscard]] auto find_document(std::string_view id) const -> Document const* {
        auto it = m_doc_index.find(std::string(id));
        return it == m_doc_index.end() ? nullptr : &m_documents[it->second];
    }
    [[nodiscard]] auto find_query(std::string_view id) const -> Query const* {
        auto it = m_query_index.find(std::string(id));
        return it == m_query_index.end() ? nullptr : &m_queries[it->second];
    }
    [[nodiscard]] auto document(std::string_view id) const -> Document const& {
        auto const* d = find_document(id);
        if (d == nullptr) {
            throw ValidationError("unknown document id: " + std::string(id));
        }
        return *d;
    }
    [[nodiscard]] auto query(std::string_view id) const -> Query const& {
        auto const* q = find_query(id);
        if (q == nullptr) {
            throw ValidationError("unknown query id: " + std::string(id));
        }
        return *q;
    }
    [[nodiscard]] auto relevant(std::string_view query_id) const -> std::set<std::string> const& {
        static std::set<std::string> const empty;
        auto it = m_qrels.find(std::string(query_id));
        return it == m_qrels.end() ? empty : it->second;
    }

    /// Domains lacking a train or a test query. Generated corpora always return an empty list.
    [[nodiscard]] auto domains_missing_queries() const -> std::vector<std::string> {
        std::vector<std::string> out;
        for (auto const& domain : m_domains) {
            bool has_train = false;
            bool has_test = false;
            for (auto const& q : m_queries) {
                if (q.domain == domain) {
                    (q.split == Split::Train ? has_train : has_test) = true;
                }
            }
            if (!has_train || !has_test) {
                out.push_back(domain);
            }
        }
        return out;
    }

  private:
    void validate_and_index() {
        std::set<std::string> domain_set;
        for (auto const& d : m_domains) {
            if (!domain_set.insert(d).second) {
                throw ValidationError("duplicate domain: " + d);
            }
        }
        for (std::size_t i = 0; i < m_documents.size(); ++i) {
            auto const& doc = m_documents[i];
            if (doc.text.empty()) {
                throw ValidationError("document " + doc.id + " has empty text");
            }
            if (domain_set.count(doc.domain) == 0) {
                throw ValidationError("document " + doc.id + " has unknown domain " + doc.domain);
            }
            if (!m_doc_index.emplace(doc.id, i).second) {
                throw ValidationError("duplicate document id: " + doc.id);
            }
        }
        for (std::size_t i = 0; i < m_queries.size(); ++i) {
            auto const& q = m_queries[i];
            if (q.text.empty()) {
                throw ValidationError("query " + q.id + " has empty text");
            }
            if (domain_set.count(q.domain) == 0) {
                throw ValidationError("query " + q.id + " has unknown domain " + q.domain);
            }
            if (!m_query_index.emplace(q.id, i).second) {
                throw ValidationError("duplicate query id: " + q.id);
            }
        }
        for (auto const& [qid, docs] : m_qrels) {
            auto const* q = find_query(qid);
            if (q == nullptr) {
                throw ValidationError("qrels reference unknown query id: " + qid);
            }
            if (docs.empty()) {
                throw ValidationError("query " + qid + " has an empty relevance set");
            }
            for (auto const& did : docs) {
                auto const* d = find_document(did);
                if (d == nullptr) {
                    throw ValidationError("qrels reference unknown document id: " + did);
                }
                if (d->split != q->split) {
                    throw ValidationError("qrel " + qid + " -> " + did + " crosses the train/test split");
                }
            }
        }
        for (auto const& q : m_queries) {
            if (m_qrels.count(q.id) == 0) {
                throw ValidationError("query " + q.id + " has no relevant document");
            }
        }
    }

    std::vector<std::string> m_domains;
    std::vector<Document> m_documents;
    std::vector<Query> m_queries;
    Qrels m_qrels;
    std::unordered_map<std::string, std::size_t> m_doc_index;
    std::unordered_map<std::string, std::size_t> m_query_index;
};

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SyntheticDomainSpec {
    std::string name;
    std::uint32_t n_topics = 200;
    std::uint32_t train_docs_per_topic = 10;
    std::uint32_t test_docs_per_topic = 10;
    std::uint32_t train_queries_per_topic = 5;
    std::uint32_t test_queries_per_topic = 1;
    /// Size of each topic's private signature vocabulary.
    std::uint32_t signature_tokens = 6;
    /// Signature tokens sampled (without replacement) into each document / query.
    std::uint32_t doc_signature_tokens = 4;
    std::uint32_t query_signature_tokens = 4;
    /// Tokens drawn from the cross-domain shared vocabulary.
    std::uint32_t doc_noise_tokens = 6;
    std::uint32_t query_noise_tokens = 2;
    std::uint32_t shared_vocab_size = 200;
};

/// Desk-scale stand-in for a multi-domain forum collection.
///
/// Topic t of domain k owns tokens "d{k}t{t}s{j}". Every document and query of the
/// topic samples a subset of them plus noise words "w{n}" from the shared vocabulary.
struct SyntheticSpec {
    std::vector<SyntheticDomainSpec> domains;
    std::uint64_t seed = 0;

    void validate() const {
        if (domains.empty()) {
            throw ConfigError("synthetic spec: domains must be non-empty");
        }
        std::set<std::string> names;
        for (std::size_t i = 0; i < domains.size(); ++i) {
            auto const& d = domains[i];
            auto field = [&](char const* name) { return "domains[" + std::to_string(i) + "]." + name; };
            if (d.name.empty()) {
                throw ConfigError("synthetic spec: " + field("name") + " must be non-empty");
            }
            if (!names.insert(d.name).second) {
                throw ConfigError("synthetic spec: " + field("name") + " duplicates " + d.name);
            }
            auto at_least_one = [&](std::uint32_t v, char const* name) {
                if (v < 1) {
                    throw ConfigError("synthetic spec: " + field(name) + " must be >= 1");
                }
            };
            at_least_one(d.n_topics, "n_topics");
            at_least_one(d.train_docs_per_topic, "train_docs_per_topic");
            at_least_one(d.test_docs_per_topic, "test_docs_per_topic");
            at_least_one(d.train_queries_per_topic, "train_queries_per_topic");
            at_least_one(d.test_queries_per_topic, "test_queries_per_topic");
            at_least_one(d.signature_tokens, "signature_tokens");
            at_least_one(d.doc_signature_tokens, "doc_signature_tokens");
            at_least_one(d.query_signature_tokens, "query_signature_tokens");
            at_least_one(d.shared_vocab_size, "shared_vocab_size");
            if (d.doc_signature_tokens > d.signature_tokens) {
                throw ConfigError("synthetic spec: " + field("doc_signature_tokens") + " exceeds signature_tokens");
            }
            if (d.query_signature_tokens > d.signature_tokens) {
                throw ConfigError("synthetic spec: " + field("query_signature_tokens") +
                                  " exceeds signature_tokens");
            }
            // Pigeonhole: any query/document pair of a topic then shares >= 2 signature tokens.
            if (d.doc_signature_tokens + d.query_signature_tokens < d.signature_tokens + 2) {
                throw ConfigError("synthetic spec: " + field("query_signature_tokens") +
                                  " + doc_signature_tokens must be >= signature_tokens + 2");
            }
        }
    }
};

inline void to_json(nlohmann::json& j, SyntheticDomainSpec const& d) {
    j = nlohmann::json{{"name", d.name},
                       {"n_topics", d.n_topics},
                       {"train_docs_per_topic", d.train_docs_per_topic},
                       {"test_docs_per_topic", d.test_docs_per_topic},
                       {"train_queries_per_topic", d.train_queries_per_topic},
                       {"test_queries_per_topic", d.test_queries_per_topic},
                       {"signature_tokens", d.signature_tokens},
                       {"doc_signature_tokens", d.doc_signature_tokens},
                       {"query_signature_tokens", d.query_signature_tokens},
                       {"doc_noise_tokens", d.doc_noise_tokens},
                       {"query_noise_tokens", d.query_noise_tokens},
                       {"shared_vocab_size", d.shared_vocab_size}};
}

inline void from_json(nlohmann::json const& j, SyntheticDomainSpec& d) {
    SyntheticDomainSpec defaults;
    d = defaults;
    j.at("name").get_to(d.name);
    auto opt = [&](char const* key, std::uint32_t& out) {
        if (j.contains(key)) {
            auto const v = j.at(key).get<std::int64_t>();
            if (v < 0) {
                throw ConfigError(std::string("synthetic spec: ") + key + " must be non-negative");
            }
            out = static_cast<std::uint32_t>(v);
        }
    };
    opt("n_topics", d.n_topics);
    opt("train_docs_per_topic", d.train_docs_per_topic);
    opt("test_docs_per_topic", d.test_docs_per_topic);
    opt("train_queries_per_topic", d.train_queries_per_topic);
    opt("test_queries_per_topic", d.test_queries_per_topic);
    opt("signature_tokens", d.signature_tokens);
    opt("doc_signature_tokens", d.doc_signature_tokens);
    opt("query_signature_tokens", d.query_signature_tokens);
    opt("doc_noise_tokens", d.doc_noise_tokens);
    opt("query_noise_tokens", d.query_noise_tokens);
    opt("shared_vocab_size", d.shared_vocab_size);
}

inline void to_json(nlohmann::json& j, SyntheticSpec const& s) {
    j = nlohmann::json{{"seed", s.seed}, {"domains", s.domains}};
}

inline void from_json(nlohmann::json const& j, SyntheticSpec& s) {
    s = SyntheticSpec{};
    if (j.contains("seed")) {
        j.at("seed").get_to(s.seed);
    }
    j.at("domains").get_to(s.domains);
}

[[nodiscard]] inline auto load_synthetic_spec(std::filesystem::path const& path) -> SyntheticSpec {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open synthetic spec: " + path.string());
    }
    try {
        auto spec = nlohmann::json::parse(in).get<SyntheticSpec>();
        spec.validate();
        return spec;
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("synthetic spec " + path.string() + ": " + e.what());
    }
}

namespace detail {
    inline auto synthetic_text(Rng& rng, std::size_t domain_index, std::uint32_t topic,
                               SyntheticDomainSpec const& d, std::uint32_t n_signature, std::uint32_t n_noise)
        -> std::string {
        std::vector<std::string> tokens;
        tokens.reserve(n_signature + n_noise);
        for (auto j : rng.sample_without_replacement(d.signature_tokens, n_signature)) {
            tokens.push_back("d" + std::to_string(domain_index) + "t" + std::to_string(topic) + "s" +
                             std::to_string(j));
        }
        for (std::uint32_t i = 0; i < n_noise; ++i) {
            tokens.push_back("w" + std::to_string(rng.uniform_index(d.shared_vocab_size)));
        }
        rng.shuffle(tokens);
        std::string text;
        for (auto const& t : tokens) {
            if (!text.empty()) {
                text += ' ';
            }
            text += t;
        }
        return text;
    }
}  // namespace detail

/// Deterministic function of (spec, seed). Each query is relevant to exactly the documents
/// of its own topic in its own split.
[[nodiscard]] inline auto generate_synthetic_corpus(SyntheticSpec const& spec, std::uint64_t seed) -> Corpus {
    spec.validate();
    std::vector<std::string> domains;
    std::vector<Document> docs;
    std::vector<Query> queries;
    Qrels qrels;
    for (std::size_t k = 0; k < spec.domains.size(); ++k) {
        auto const& d = spec.domains[k];
        domains.push_back(d.name);
        Rng rng(derive_seed(seed, "synthetic-domain", k));
        for (Split split : {Split::Train, Split::Test}) {
            auto const split_name = std::string(to_string(split));
            std::uint32_t const docs_per_topic =
                split == Split::Train ? d.train_docs_per_topic : d.test_docs_per_topic;
            std::uint32_t const queries_per_topic =
                split == Split::Train ? d.train_queries_per_topic : d.test_queries_per_topic;
            std::size_t doc_counter = 0;
            std::size_t query_counter = 0;
            for (std::uint32_t t = 0; t < d.n_topics; ++t) {
                std::vector<std::string> topic_docs;
                for (std::uint32_t i = 0; i < docs_per_topic; ++i) {
                    Document doc;
                    doc.id = d.name + "-" + split_name + "-d" + std::to_string(doc_counter++);
                    doc.text = detail::synthetic_text(rng, k, t, d, d.doc_signature_tokens, d.doc_noise_tokens);
                    doc.domain = d.name;
                    doc.split = split;
                    topic_docs.push_back(doc.id);
                    docs.push_back(std::move(doc));
                }
                for (std::uint32_t i = 0; i < queries_per_topic; ++i) {
                    Query q;
                    q.id = d.name + "-" + split_name + "-q" + std::to_string(query_counter++);
                    q.text = detail::synthetic_text(rng, k, t, d, d.query_signature_tokens, d.query_noise_tokens);
                    q.domain = d.name;
                    q.split = split;
                    qrels[q.id] = std::set<std::string>(topic_docs.begin(), topic_docs.end());
                    queries.push_back(std::move(q));
                }
            }
        }
    }
    return Corpus::create(std::move(domains), std::move(docs), std::move(queries), std::move(qrels));
}

// ---------------------------------------------------------------------------
// File ingestion: collection TSV, queries TSV, TREC qrels
// ---------------------------------------------------------------------------

struct LoadReport {
    std::size_t dropped_queries = 0;
    std::vector<std::string> domains_missing_queries;
};

namespace detail {
    inline auto split_tabs(std::string const& line) -> std::vector<std::string> {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            auto const pos = line.find('\t', start);
            if (pos == std::string::npos) {
                out.push_back(line.substr(start));
                return out;
            }
            out.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
    }

    inline auto read_lines(std::filesystem::path const& path) -> std::vector<std::string> {
        std::ifstream in(path);
        if (!in) {
            throw std::runtime_error("cannot open " + path.string());
        }
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            lines.push_back(std::move(line));
        }
        return lines;
    }

    inline auto is_blank(std::string_view s) -> bool {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
    }
}  // namespace detail

/// Loads a collection (doc_id TAB text TAB domain [TAB split]), queries
/// (query_id TAB text TAB domain TAB split) and TREC qrels (query_id 0 doc_id relevance).
///
/// A document without an explicit split column takes the split of the queries that
/// reference it, or "test" when unreferenced. Queries left without relevant documents
/// are dropped and counted in the report.
[[nodiscard]] inline auto load_lotte_style(std::filesystem::path const& collection_path,
                                           std::filesystem::path const& queries_path,
                                           std::filesystem::path const& qrels_path,
                                           LoadReport* report = nullptr) -> Corpus {
    std::vector<std::string> domains;
    std::set<std::string> domain_set;
    auto note_domain = [&](std::string const& d) {
        if (domain_set.insert(d).second) {
            domains.push_back(d);
        }
    };

    std::vector<Document> docs;
    std::vector<bool> explicit_split;
    std::unordered_map<std::string, std::size_t> doc_pos;
    {
        auto const lines = detail::read_lines(collection_path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (detail::is_blank(lines[i])) {
                continue;
            }
            auto fields = detail::split_tabs(lines[i]);
            if (fields.size() != 3 && fields.size() != 4) {
                throw ParseError(collection_path.string(), i + 1, "expected 3 or 4 tab-separated fields");
            }
            if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
                throw ParseError(collection_path.string(), i + 1, "empty field");
            }
            Document doc{fields[0], fields[1], fields[2], Split::Test};
            bool has_split = false;
            if (fields.size() == 4) {
                auto split = parse_split(fields[3]);
                if (!split) {
                    throw ParseError(collection_path.string(), i + 1, "split must be train or test");
                }
                doc.split = *split;
                has_split = true;
            }
            if (!doc_pos.emplace(doc.id, docs.size()).second) {
                throw ValidationError("duplicate document id: " + doc.id);
            }
            note_domain(doc.domain);
            docs.push_back(std::move(doc));
            explicit_split.push_back(has_split);
        }
    }

    std::vector<Query> queries;
    std::unordered_map<std::string, std::size_t> query_pos;
    {
        auto const lines = detail::read_lines(queries_path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (detail::is_blank(lines[i])) {
                continue;
            }
            auto fields = detail::split_tabs(lines[i]);
            if (fields.size() != 4) {
                throw ParseError(queries_path.string(), i + 1, "expected 4 tab-separated fields");
            }
            if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
                throw ParseError(queries_path.string(), i + 1, "empty field");
            }
            auto split = parse_split(fields[3]);
            if (!split) {
                throw ParseError(queries_path.string(), i + 1, "split must be train or test");
            }
            if (!query_pos.emplace(fields[0], queries.size()).second) {
                throw ValidationError("duplicate query id: " + fields[0]);
            }
            note_domain(fields[2]);
            queries.push_back(Query{fields[0], fields[1], fields[2], *split});
        }
    }

    Qrels qrels;
    {
        auto const lines = detail::read_lines(qrels_path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (detail::is_blank(lines[i])) {
                continue;
            }
            std::istringstream ss(lines[i]);
            std::string qid;
            std::string iter;
            std::string did;
            std::string rel_text;
            std::string extra;
            if (!(ss >> qid >> iter >> did >> rel_text) || (ss >> extra)) {
                throw ParseError(qrels_path.string(), i + 1, "expected 'query_id 0 doc_id relevance'");
            }
            long relevance = 0;
            try {
                std::size_t used = 0;
                relevance = std::stol(rel_text, &used);
                if (used != rel_text.size()) {
                    throw std::invalid_argument(rel_text);
                }
            } catch (std::exception const&) {
                throw ParseError(qrels_path.string(), i + 1, "relevance must be an integer");
            }
            if (query_pos.count(qid) == 0) {
                throw ValidationError("qrels line " + std::to_string(i + 1) + " references unknown query id: " + qid);
            }
            if (doc_pos.count(did) == 0) {
                throw ValidationError("qrels line " + std::to_string(i + 1) +
                                      " references unknown document id: " + did);
            }
            if (relevance > 0) {
                qrels[qid].insert(did);
            }
        }
    }

    // Infer document splits from the queries that reference them.
    std::vector<std::optional<Split>> inferred(docs.size());
    for (auto const& [qid, dids] : qrels) {
        auto const split = queries[query_pos.at(qid)].split;
        for (auto const& did : dids) {
            auto const pos = doc_pos.at(did);
            if (explicit_split[pos]) {
                continue;
            }
            if (inferred[pos] && *inferred[pos] != split) {
                throw ValidationError("document " + did + " is relevant to both train and test queries");
            }
            inferred[pos] = split;
        }
    }
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (inferred[i]) {
            docs[i].split = *inferred[i];
        }
    }

    std::vector<Query> kept;
    std::size_t dropped = 0;
    for (auto& q : queries) {
        if (qrels.count(q.id) == 0) {
            ++dropped;
            continue;
        }
        kept.push_back(std::move(q));
    }
    if (dropped > 0) {
        warn("dropped " + std::to_string(dropped) + " queries without relevant documents");
    }
    auto corpus = Corpus::create(std::move(domains), std::move(docs), std::move(kept), std::move(qrels));
    auto missing = corpus.domains_missing_queries();
    if (!missing.empty()) {
        warn(std::to_string(missing.size()) + " domain(s) lack a train or test query");
    }
    if (report != nullptr) {
        report->dropped_queries = dropped;
        report->domains_missing_queries = std::move(missing);
    }
    return corpus;
}

/// Writes the three ingestion files (collection.tsv, queries.tsv, qrels.txt) into dir. The collection
/// carries the optional split column so a round trip is exact.
inline void write_corpus(Corpus const& corpus, std::filesystem::path const& dir) {
    std::filesystem::create_directories(dir);
    auto check = [](std::string const& field, std::string const& id) {
        if (field.find_first_of("\t\n\r") != std::string::npos) {
            throw ValidationError("field of " + id + " contains a tab or newline");
        }
    };
    {
        std::ofstream out(dir / "collection.tsv", std::ios::binary | std::ios::trunc);
        for (auto const& d : corpus.documents()) {
            check(d.text, d.id);
            out << d.id << '\t' << d.text << '\t' << d.domain << '\t' << to_string(d.split) << '\n';
        }
    }
    {
        std::ofstream out(dir / "queries.tsv", std::ios::binary | std::ios::trunc);
        for (auto const& q : corpus.queries()) {
            check(q.text, q.id);
            out << q.id << '\t' << q.text << '\t' << q.domain << '\t' << to_string(q.split) << '\n';
        }
    }
    {
        std::ofstream out(dir / "qrels.txt", std::ios::binary | std::ios::trunc);
        for (auto const& [qid, dids] : corpus.qrels()) {
            for (auto const& did : dids) {
                out << qid << " 0 " << did << " 1\n";
            }
        }
    }
    if (!std::filesystem::exists(dir / "qrels.txt")) {
        throw std::runtime_error("failed to write corpus into " + dir.string());
    }
}

[[nodiscard]] inline auto load_corpus_dir(std::filesystem::path const& dir, LoadReport* report = nullptr) -> Corpus {
    return load_lotte_style(dir / "collection.tsv", dir / "queries.tsv", dir / "qrels.txt", report);
}

// ---------------------------------------------------------------------------
// Training triples
// ---------------------------------------------------------------------------

struct TripleIds {
    std::string query_id;
    std::string pos_doc_id;
    std::string neg_doc_id;

    auto operator==(TripleIds const&) const -> bool = default;
};

/// One (query, relevant, non-relevant) triple per train query of the domain.
/// The positive is uniform over the query's relevant documents; the negative is uniform
/// over the domain's train documents outside the relevance set.
[[nodiscard]] inline auto make_training_triples(Corpus const& corpus, std::string_view domain, std::uint64_t seed)
    -> std::vector<TripleIds> {
    if (!corpus.has_domain(domain)) {
        throw ConfigError("unknown domain: " + std::string(domain));
    }
    std::vector<std::string const*> train_docs;
    for (auto const& d : corpus.documents()) {
        if (d.domain == domain && d.split == Split::Train) {
            train_docs.push_back(&d.id);
        }
    }
    Rng rng(derive_seed(seed, "triples"));
    std::vector<TripleIds> triples;
    std::size_t skipped = 0;
    std::vector<std::string const*> negatives;
    for (auto const& q : corpus.queries()) {
        if (q.domain != domain || q.split != Split::Train) {
            continue;
        }
        auto const& rel = corpus.relevant(q.id);
        std::vector<std::string const*> positives;
        for (auto const& did : rel) {
            if (corpus.document(did).split == Split::Train) {
                positives.push_back(&did);
            }
        }
        negatives.clear();
        for (auto const* did : train_docs) {
            if (rel.count(*did) == 0) {
                negatives.push_back(did);
            }
        }
        if (positives.empty() || negatives.empty()) {
            ++skipped;
            continue;
        }
        auto const& pos = *positives[rng.uniform_index(positives.size())];
        auto const& neg = *negatives[rng.uniform_index(negatives.size())];
        triples.push_back(TripleIds{q.id, pos, neg});
    }
    if (skipped > 0) {
        warn("make_training_triples(" + std::string(domain) + "): skipped " + std::to_string(skipped) +
             " queries without a relevant or non-relevant train document");
    }
    return triples;
}

}  // namespace murr
