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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "murr/corpus.hpp"
#include "test_util.hpp"

using namespace murr;
using murr::testing::TempDir;
using murr::testing::WarningCapture;
using murr::testing::write_file;

namespace {

auto words(std::string const& text) -> std::vector<std::string> {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        out.push_back(w);
    }
    return out;
}

auto is_signature(std::string const& token) -> bool { return token.front() == 'd'; }

auto tiny_spec() -> SyntheticSpec {
    SyntheticSpec spec;
    for (auto const* name : {"alpha", "beta"}) {
        SyntheticDomainSpec d;
        d.name = name;
        d.n_topics = 2;
        d.train_docs_per_topic = 1;
        d.test_docs_per_topic = 2;
        d.train_queries_per_topic = 1;
        d.test_queries_per_topic = 1;
        spec.domains.push_back(d);
    }
    return spec;
}

}  // namespace

TEST(Synthetic, SameSpecAndSeedGiveIdenticalFiles) {
    auto spec = murr::testing::small_spec({"a", "b"});
    TempDir dir;
    write_corpus(generate_synthetic_corpus(spec, 7), dir / "one");
    write_corpus(generate_synthetic_corpus(spec, 7), dir / "two");
    for (auto const* f : {"collection.tsv", "queries.tsv", "qrels.txt"}) {
        EXPECT_EQ(murr::testing::read_file(dir / "one" / f), murr::testing::read_file(dir / "two" / f)) << f;
    }
    auto other = generate_synthetic_corpus(spec, 8);
    EXPECT_NE(other.documents(), generate_synthetic_corpus(spec, 7).documents());
}

TEST(Synthetic, CountsFollowTheSpec) {
    auto corpus = generate_synthetic_corpus(tiny_spec(), 1);
    std::size_t test_docs = 0;
    std::size_t test_queries = 0;
    for (auto const& d : corpus.documents()) {
        test_docs += d.split == Split::Test ? 1 : 0;
    }
    for (auto const& q : corpus.queries()) {
        if (q.split == Split::Test) {
            ++test_queries;
            EXPECT_EQ(corpus.relevant(q.id).size(), 2U);
        }
    }
    EXPECT_EQ(test_docs, 8U);
    EXPECT_EQ(test_queries, 4U);
    EXPECT_TRUE(corpus.domains_missing_queries().empty());
}

TEST(Synthetic, QueriesShareTwoSignatureTokensWithEveryRelevantDoc) {
    auto corpus = generate_synthetic_corpus(murr::testing::small_spec({"a", "b", "c"}), 3);
    for (auto const& q : corpus.queries()) {
        auto qw = words(q.text);
        std::set<std::string> qsig;
        for (auto const& w : qw) {
            if (is_signature(w)) {
                qsig.insert(w);
            }
        }
        for (auto const& did : corpus.relevant(q.id)) {
            std::size_t shared = 0;
            for (auto const& w : words(corpus.document(did).text)) {
                shared += qsig.count(w);
            }
            ASSERT_GE(shared, 2U) << q.id << " vs " << did;
        }
    }
}

TEST(Synthetic, DifferentTopicsShareOnlyNoiseTokens) {
    auto corpus = generate_synthetic_corpus(murr::testing::small_spec({"a", "b"}), 4);
    // signature token -> set of relevance groups (keyed by the first query of the topic) it appears in
    std::map<std::string, std::set<std::string>> owner;
    std::map<std::string, std::string> doc_group;
    for (auto const& [qid, docs] : corpus.qrels()) {
        for (auto const& d : docs) {
            doc_group.emplace(d, *docs.begin());
        }
    }
    for (auto const& d : corpus.documents()) {
        for (auto const& w : words(d.text)) {
            if (is_signature(w)) {
                owner[w].insert(doc_group.at(d.id));
            } else {
                ASSERT_EQ(w.front(), 'w');
            }
        }
    }
    for (auto const& [token, groups] : owner) {
        // Train and test docs of the same topic share a signature, so allow at most one group per split.
        std::set<Split> splits;
        for (auto const& g : groups) {
            ASSERT_TRUE(splits.insert(corpus.document(g).split).second) << token;
        }
    }
}

TEST(Synthetic, TokenOverlapRankerFindsRelevantDocsInTopFive) {
    SyntheticSpec spec;
    for (auto const& name : {"science", "writing"}) {
        SyntheticDomainSpec d;
        d.name = name;
        spec.domains.push_back(d);
    }
    auto corpus = generate_synthetic_corpus(spec, 11);
    std::map<std::string, std::vector<std::pair<std::string, std::multiset<std::string>>>> by_domain;
    for (auto const& d : corpus.documents()) {
        if (d.split == Split::Test) {
            auto w = words(d.text);
            by_domain[d.domain].emplace_back(d.id, std::multiset<std::string>(w.begin(), w.end()));
        }
    }
    std::size_t hits = 0;
    std::size_t total = 0;
    for (auto const& q : corpus.queries()) {
        if (q.split != Split::Test) {
            continue;
        }
        auto qw = words(q.text);
        std::set<std::string> qset(qw.begin(), qw.end());
        std::vector<std::pair<std::size_t, std::string>> scored;
        for (auto const& [id, bag] : by_domain[q.domain]) {
            std::size_t overlap = 0;
            for (auto const& w : qset) {
                overlap += bag.count(w);
            }
            scored.emplace_back(overlap, id);
        }
        std::sort(scored.begin(), scored.end(), [](auto const& a, auto const& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        auto const& rel = corpus.relevant(q.id);
        bool hit = false;
        for (std::size_t r = 0; r < 5 && r < scored.size(); ++r) {
            hit = hit || rel.count(scored[r].second) > 0;
        }
        hits += hit ? 1 : 0;
        ++total;
    }
    ASSERT_EQ(total, 400U);
    EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.95);
}

TEST(Synthetic, SpecValidationRejectsBadFields) {
    auto spec = tiny_spec();
    spec.domains[0].doc_signature_tokens = 9;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = tiny_spec();
    spec.domains[1].name = "alpha";
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = tiny_spec();
    spec.domains[0].n_topics = 0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = tiny_spec();
    spec.domains[0].doc_signature_tokens = 2;
    spec.domains[0].query_signature_tokens = 2;
    EXPECT_THROW(spec.validate(), ConfigError);
    EXPECT_THROW(SyntheticSpec{}.validate(), ConfigError);
}

TEST(Synthetic, SpecJsonRoundTripAndErrors) {
    auto spec = tiny_spec();
    spec.seed = 9;
    auto back = nlohmann::json(spec).get<SyntheticSpec>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(spec));

    TempDir dir;
    write_file(dir / "bad.json", R"({"domains": [{"name": "a", "n_topics": -1}]})");
    EXPECT_THROW((void)load_synthetic_spec(dir / "bad.json"), ConfigError);
    write_file(dir / "broken.json", "{");
    EXPECT_THROW((void)load_synthetic_spec(dir / "broken.json"), ConfigError);
    EXPECT_THROW((void)load_synthetic_spec(dir / "missing.json"), ConfigError);
    write_file(dir / "ok.json", R"({"domains": [{"name": "a", "n_topics": 3}]})");
    auto ok = load_synthetic_spec(dir / "ok.json");
    EXPECT_EQ(ok.domains.at(0).n_topics, 3U);
    EXPECT_EQ(ok.domains.at(0).shared_vocab_size, SyntheticDomainSpec{}.shared_vocab_size);
}

TEST(Ingestion, ThreeDocsOneQueryOneQrel) {
    TempDir dir;
    write_file(dir / "c.tsv", "d1\tapple pie\tfood\nd2\tbanana split\tfood\nd3\tcherry tart\tfood\n");
    write_file(dir / "q.tsv", "q1\tapple dessert\tfood\ttest\n");
    write_file(dir / "r.txt", "q1 0 d1 1\n");
    auto corpus = load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt");
    EXPECT_EQ(corpus.documents().size(), 3U);
    EXPECT_EQ(corpus.queries().size(), 1U);
    EXPECT_EQ(corpus.relevant("q1"), std::set<std::string>{"d1"});
    EXPECT_EQ(corpus.document("d1").split, Split::Test);
}

TEST(Ingestion, DanglingQrelNamesTheMissingId) {
    TempDir dir;
    write_file(dir / "c.tsv", "d1\tapple pie\tfood\n");
    write_file(dir / "q.tsv", "q1\tapple dessert\tfood\ttest\n");
    write_file(dir / "r.txt", "q1 0 nosuchdoc 1\n");
    try {
        (void)load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt");
        FAIL() << "expected ValidationError";
    } catch (ValidationError const& e) {
        EXPECT_NE(std::string(e.what()).find("nosuchdoc"), std::string::npos);
    }
}

TEST(Ingestion, EmptyQrelsLeavesNoUsableQueriesAndWarns) {
    TempDir dir;
    write_file(dir / "c.tsv", "d1\tapple pie\tfood\n");
    write_file(dir / "q.tsv", "q1\tapple dessert\tfood\ttest\n");
    write_file(dir / "r.txt", "");
    WarningCapture warnings;
    LoadReport report;
    auto corpus = load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt", &report);
    EXPECT_TRUE(corpus.queries().empty());
    EXPECT_EQ(report.dropped_queries, 1U);
    EXPECT_GE(warnings.count(), 1U);
}

TEST(Ingestion, MalformedLinesReportLineNumbers) {
    TempDir dir;
    write_file(dir / "c.tsv", "d1\tapple pie\tfood\nd2 missing tabs\n");
    write_file(dir / "q.tsv", "q1\tapple\tfood\ttest\n");
    write_file(dir / "r.txt", "q1 0 d1 1\n");
    try {
        (void)load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt");
        FAIL() << "expected ParseError";
    } catch (ParseError const& e) {
        EXPECT_EQ(e.line(), 2U);
    }
    write_file(dir / "c.tsv", "d1\tapple pie\tfood\n");
    write_file(dir / "q.tsv", "q1\tapple\tfood\tdev\n");
    EXPECT_THROW((void)load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt"), ParseError);
    write_file(dir / "q.tsv", "q1\tapple\tfood\ttest\n");
    write_file(dir / "r.txt", "q1 0 d1 yes\n");
    EXPECT_THROW((void)load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt"), ParseError);
    write_file(dir / "r.txt", "q1 0 d1\n");
    EXPECT_THROW((void)load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt"), ParseError);
    EXPECT_THROW((void)load_lotte_style(dir / "none.tsv", dir / "q.tsv", dir / "r.txt"), std::runtime_error);
}

TEST(Ingestion, SplitIsInferredFromReferencingQueries) {
    TempDir dir;
    write_file(dir / "c.tsv", "d1\ta b\tx\nd2\tc d\tx\nd3\te f\tx\ttrain\n");
    write_file(dir / "q.tsv", "q1\ta\tx\ttrain\nq2\tc\tx\ttest\n");
    write_file(dir / "r.txt", "q1 0 d1 1\nq2 0 d2 1\nq1 0 d3 0\n");
    auto corpus = load_lotte_style(dir / "c.tsv", dir / "q.tsv", dir / "r.txt");
    EXPECT_EQ(corpus.document("d1").split, Split::Train);
    EXPECT_EQ(corpus.document("d2").split, Split::Test);
    EXPECT_EQ(corpus.document("d3").split, Split::Train);
    // Zero-relevance lines are ignored.
    EXPECT_EQ(corpus.relevant("q1"), std::set<std::string>{"d1"});
}

TEST(Ingestion, WriteThenLoadRoundTrips) {
    auto corpus = generate_synthetic_corpus(murr::testing::small_spec({"a", "b"}, 5), 2);
    TempDir dir;
    write_corpus(corpus, dir.path());
    auto back = load_corpus_dir(dir.path());
    EXPECT_EQ(back.documents(), corpus.documents());
    EXPECT_EQ(back.queries(), corpus.queries());
    EXPECT_EQ(back.qrels(), corpus.qrels());
    EXPECT_EQ(back.domains(), corpus.domains());
}

TEST(CorpusModel, CreateRejectsStructuralViolations) {
    std::vector<std::string> domains{"x"};
    Document d1{"d1", "text", "x", Split::Test};
    Query q1{"q1", "text", "x", Split::Test};
    EXPECT_NO_THROW((void)Corpus::create(domains, {d1}, {q1}, {{"q1", {"d1"}}}));
    EXPECT_THROW((void)Corpus::create(domains, {d1, d1}, {q1}, {{"q1", {"d1"}}}), ValidationError);
    EXPECT_THROW((void)Corpus::create(domains, {d1}, {q1}, {{"q1", {}}}), ValidationError);
    EXPECT_THROW((void)Corpus::create(domains, {d1}, {q1}, {}), ValidationError);
    EXPECT_THROW((void)Corpus::create({"y"}, {d1}, {q1}, {{"q1", {"d1"}}}), ValidationError);
    Document train_doc{"d2", "text", "x", Split::Train};
    EXPECT_THROW((void)Corpus::create(domains, {d1, train_doc}, {q1}, {{"q1", {"d2"}}}), ValidationError);
    Document empty{"d3", "", "x", Split::Test};
    EXPECT_THROW((void)Corpus::create(domains, {d1, empty}, {q1}, {{"q1", {"d1"}}}), ValidationError);
    auto c = Corpus::create(domains, {d1}, {q1}, {{"q1", {"d1"}}});
    EXPECT_THROW((void)c.document("zz"), ValidationError);
    EXPECT_EQ(c.find_query("zz"), nullptr);
}

TEST(Triples, OneQueryOneRelevantTwoNegatives) {
    std::vector<Document> docs{{"p", "a", "x", Split::Train}, {"n1", "b", "x", Split::Train},
                               {"n2", "c", "x", Split::Train}};
    std::vector<Query> queries{{"q", "a", "x", Split::Train}};
    auto corpus = Corpus::create({"x"}, docs, queries, {{"q", {"p"}}});
    auto triples = make_training_triples(corpus, "x", 1);
    ASSERT_EQ(triples.size(), 1U);
    EXPECT_EQ(triples[0].query_id, "q");
    EXPECT_EQ(triples[0].pos_doc_id, "p");
    EXPECT_TRUE(triples[0].neg_doc_id == "n1" || triples[0].neg_doc_id == "n2");
}

TEST(Triples, SameSeedSameSequence) {
    auto corpus = generate_synthetic_corpus(murr::testing::small_spec({"a"}), 1);
    EXPECT_EQ(make_training_triples(corpus, "a", 5), make_training_triples(corpus, "a", 5));
    EXPECT_NE(make_training_triples(corpus, "a", 5), make_training_triples(corpus, "a", 6));
    EXPECT_THROW((void)make_training_triples(corpus, "nope", 5), ConfigError);
}

TEST(Triples, SkipsQueriesWithoutNegativesAndWarns) {
    std::vector<Document> docs{{"p", "a", "x", Split::Train}};
    std::vector<Query> queries{{"q", "a", "x", Split::Train}};
    auto corpus = Corpus::create({"x"}, docs, queries, {{"q", {"p"}}});
    WarningCapture warnings;
    EXPECT_TRUE(make_training_triples(corpus, "x", 1).empty());
    EXPECT_EQ(warnings.count(), 1U);
}

TEST(Triples, NegativeSelectionIsUniform) {
    // 1000 queries, all relevant to p, so every query sees the same 10 candidate negatives.
    std::vector<Document> docs{{"p", "a", "x", Split::Train}};
    for (int i = 0; i < 10; ++i) {
        docs.push_back({"n" + std::to_string(i), "b", "x", Split::Train});
    }
    std::vector<Query> queries;
    Qrels qrels;
    for (int i = 0; i < 1000; ++i) {
        auto id = "q" + std::to_string(i);
        queries.push_back({id, "a", "x", Split::Train});
        qrels[id] = {"p"};
    }
    auto corpus = Corpus::create({"x"}, docs, queries, qrels);
    auto triples = make_training_triples(corpus, "x", 123);
    ASSERT_EQ(triples.size(), 1000U);
    std::map<std::string, double> counts;
    for (auto const& t : triples) {
        EXPECT_EQ(t.pos_doc_id, "p");
        counts[t.neg_doc_id] += 1.0;
    }
    ASSERT_EQ(counts.size(), 10U);
    double const expected = 100.0;
    double const sigma = std::sqrt(1000.0 * 0.1 * 0.9);
    double chi2 = 0.0;
    for (auto const& [id, c] : counts) {
        EXPECT_LE(std::abs(c - expected), 3.0 * sigma) << id;
        chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, boost::math::quantile(boost::math::chi_squared(9), 0.999));
}
