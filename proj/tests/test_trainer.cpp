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
#include <numeric>
#include <string>
#include <vector>

#include "murr/corpus.hpp"
#include "murr/evalkit.hpp"
#include "murr/trainer.hpp"
#include "murr/vindex.hpp"
#include "test_util.hpp"

using namespace murr;
using murr::testing::TempDir;

namespace {

auto random_text(Rng& rng, std::size_t words) -> std::string {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        out += (i ? " w" : "w") + std::to_string(rng.uniform_index(40));
    }
    return out;
}

auto random_triples(Rng& rng, std::size_t n) -> std::vector<TrainingTriple> {
    std::vector<TrainingTriple> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({random_text(rng, 3), random_text(rng, 5), random_text(rng, 5)});
    }
    return out;
}

auto random_replay(Rng& rng, EncoderModel const& m, std::size_t n) -> std::vector<ReplayItem> {
    std::vector<ReplayItem> out;
    for (auto& t : random_triples(rng, n)) {
        ReplayItem item{t, 0, encode(m, t.pos), encode(m, t.neg)};
        for (double& x : item.pos_anchor) {
            x += rng.normal();
        }
        for (double& x : item.neg_anchor) {
            x += rng.normal();
        }
        out.push_back(std::move(item));
    }
    return out;
}

template <typename LossFn>
auto max_fd_error(EncoderModel const& m, std::vector<double> const& grad, LossFn loss) -> double {
    double const h = 1e-6;
    double worst = 0.0;
    auto probe = m;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        double const x = probe.params()[i];
        probe.params()[i] = x + h;
        double const up = loss(probe);
        probe.params()[i] = x - h;
        double const down = loss(probe);
        probe.params()[i] = x;
        double const fd = (up - down) / (2 * h);
        double const denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    return worst;
}

auto small_train(std::size_t steps) -> TrainConfig {
    TrainConfig c;
    c.steps = steps;
    c.batch_size = 4;
    c.learning_rate = 0.01;
    c.seed = 3;
    return c;
}

}  // namespace

TEST(Losses, SoftplusValues) {
    EXPECT_NEAR(softplus(-2.0), std::log(1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(softplus(-2.0), 0.126928, 1e-6);
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
    EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
    EXPECT_EQ(softplus(-800.0), 0.0);
    EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
    EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
}

TEST(Losses, ContrastiveIsLn2WhenScoresTie) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 1);
    std::vector<TrainingTriple> batch{{"query words", "same doc", "same doc"}};
    EXPECT_NEAR(contrastive_loss(m, batch).loss, std::log(2.0), 1e-15);
}

TEST(Losses, ContrastiveMatchesSoftplusOfScoreGap) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 2);
    Rng rng(4);
    auto batch = random_triples(rng, 6);
    double expected = 0.0;
    for (auto const& t : batch) {
        auto q = encode(m, t.query);
        expected += softplus(similarity(q, encode(m, t.neg)) - similarity(q, encode(m, t.pos)));
    }
    EXPECT_NEAR(contrastive_loss(m, batch).loss, expected / 6.0, 1e-12);
    EXPECT_THROW((void)contrastive_loss(m, std::vector<TrainingTriple>{}), std::invalid_argument);
}

TEST(Losses, RegularizationZeroAtAnchors) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 5);
    Rng rng(6);
    auto items = random_replay(rng, m, 3);
    for (auto& it : items) {
        it.pos_anchor = encode(m, it.triple.pos);
        it.neg_anchor = encode(m, it.triple.neg);
    }
    auto r = regularization_loss(m, items);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_TRUE(std::all_of(r.grad.begin(), r.grad.end(), [](double g) { return g == 0.0; }));
}

TEST(Losses, RegularizationUsesUnsquaredNorms) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 7);
    ReplayItem item{{"q", "pos doc", "neg doc"}, 0, encode(m, "pos doc"), encode(m, "neg doc")};
    item.pos_anchor[0] -= 3.0;
    item.pos_anchor[1] -= 4.0;
    EXPECT_NEAR(regularization_loss(m, std::vector<ReplayItem>{item}).loss, 2.5, 1e-12);
}

TEST(Losses, TotalComposesContrastiveAndRegularization) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 8);
    Rng rng(9);
    auto session = random_triples(rng, 4);
    auto replay = random_replay(rng, m, 3);
    std::vector<TrainingTriple> both = session;
    for (auto const& r : replay) {
        both.push_back(r.triple);
    }
    double const lc = contrastive_loss(m, both).loss;
    double const lr = regularization_loss(m, replay).loss;
    EXPECT_NEAR(total_loss(m, session, replay, 0.01).loss, lc + 0.01 * lr, 1e-12);
    EXPECT_NEAR(total_loss(m, session, replay, 0.0).loss, lc, 1e-12);
    EXPECT_NEAR(total_loss(m, session, {}, 0.3).loss, contrastive_loss(m, session).loss, 1e-12);
    EXPECT_NEAR(0.6931 + 0.01 * 2.5, 0.7181, 1e-12);
    EXPECT_THROW((void)total_loss(m, session, replay, -1.0), std::invalid_argument);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
    Rng rng(10);
    for (int trial = 0; trial < 6; ++trial) {
        auto m = EncoderModel::random_init(EncoderDims{64, 6, 5, 4}, 100 + trial);
        for (double& x : m.b1()) {
            x = 0.3 * rng.normal();
        }
        auto session = random_triples(rng, 1 + rng.uniform_index(4));
        auto replay = random_replay(rng, m, 1 + rng.uniform_index(3));
        double const alpha = rng.uniform01();

        auto c = contrastive_loss(m, session);
        EXPECT_LT(max_fd_error(m, c.grad, [&](EncoderModel const& p) { return contrastive_loss(p, session).loss; }),
                  1e-5);
        auto r = regularization_loss(m, replay);
        EXPECT_LT(max_fd_error(m, r.grad, [&](EncoderModel const& p) { return regularization_loss(p, replay).loss; }),
                  1e-5);
        auto t = total_loss(m, session, replay, alpha);
        EXPECT_LT(max_fd_error(m, t.grad,
                               [&](EncoderModel const& p) { return total_loss(p, session, replay, alpha).loss; }),
                  1e-5);
    }
}

TEST(Adam, FirstStepMovesByLearningRate) {
    AdamState adam(1);
    std::vector<double> p{0.0};
    std::vector<double> g{2.0};
    adam.step(p, g, 0.001);
    // m_hat = 2, v_hat = 4, so the step is lr * 2 / (2 + eps).
    EXPECT_NEAR(p[0], -0.001 * 2.0 / (2.0 + 1e-8), 1e-18);
    EXPECT_NEAR(p[0], -0.001, 1e-10);
    EXPECT_EQ(adam.steps_taken(), 1U);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    AdamState adam(3);
    std::vector<double> p{1.0, -2.0, 3.0};
    std::vector<double> g{0.0, 0.0, 0.0};
    for (int i = 0; i < 10; ++i) {
        adam.step(p, g, 0.1);
    }
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, NonFiniteGradientIsRejected) {
    AdamState adam(2);
    std::vector<double> p{0.0, 0.0};
    std::vector<double> g{1.0, std::nan("")};
    EXPECT_THROW(adam.step(p, g, 0.1), TrainingError);
    std::vector<double> wrong{1.0};
    EXPECT_THROW(adam.step(p, wrong, 0.1), std::invalid_argument);
}

TEST(Adam, TrainingIsBitReproducible) {
    Rng rng(11);
    auto triples = random_triples(rng, 10);
    auto base = EncoderModel::random_init(murr::testing::small_dims(), 1);
    auto a = train_session(Strategy::CFNoReplay, base, base, triples, {}, small_train(20), 1);
    auto b = train_session(Strategy::CFNoReplay, base, base, triples, {}, small_train(20), 1);
    EXPECT_TRUE(a.same_parameters(b));
    EXPECT_FALSE(a.same_parameters(base));
}

TEST(Replay, SampleSizesAndAnchors) {
    Rng rng(12);
    auto triples = random_triples(rng, 10);
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 2);
    EXPECT_TRUE(sample_replay(triples, m, 0, 1, 0).empty());
    EXPECT_EQ(sample_replay(triples, m, 50, 1, 0).size(), 10U);
    auto some = sample_replay(triples, m, 4, 1, 2);
    ASSERT_EQ(some.size(), 4U);
    for (auto const& item : some) {
        EXPECT_EQ(item.origin_session, 2U);
        EXPECT_EQ(item.pos_anchor, encode(m, item.triple.pos));
        EXPECT_EQ(item.neg_anchor, encode(m, item.triple.neg));
        EXPECT_NE(std::find(triples.begin(), triples.end(), item.triple), triples.end());
    }
    EXPECT_EQ(some, sample_replay(triples, m, 4, 1, 2));
}

TEST(Replay, SetEnforcesPerSessionLimit) {
    ReplaySet set(2);
    ReplayItem a{{"q", "p", "n"}, 0, {}, {}};
    set.add({a, a});
    ReplayItem b = a;
    b.origin_session = 1;
    set.add({b});
    EXPECT_EQ(set.size(), 3U);
    EXPECT_EQ(set.count_for(0), 2U);
    EXPECT_THROW(set.add({a}), std::logic_error);
}

TEST(Replay, FileRoundTrip) {
    Rng rng(13);
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 3);
    auto items = random_replay(rng, m, 5);
    items[2].triple.query = "caf\xC3\xA9 query";
    TempDir dir;
    save_replay(items, m.dims().out, dir / "r.bin");
    EXPECT_EQ(load_replay(dir / "r.bin"), items);
    murr::testing::write_file(dir / "bad.bin", "MURRRPL1");
    EXPECT_THROW((void)load_replay(dir / "bad.bin"), FormatError);
    EXPECT_THROW(save_replay(items, 7, dir / "x.bin"), std::invalid_argument);
}

TEST(Replay, DriftIsZeroForTheAnchoringModel) {
    Rng rng(14);
    auto triples = random_triples(rng, 6);
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 4);
    auto items = sample_replay(triples, m, 6, 1, 0);
    EXPECT_EQ(mean_anchor_drift(m, items), 0.0);
    auto other = EncoderModel::random_init(murr::testing::small_dims(), 5);
    EXPECT_GT(mean_anchor_drift(other, items), 0.0);
    EXPECT_EQ(mean_anchor_drift(m, {}), 0.0);
}

TEST(Strategies, ParseAndPrintRoundTrip) {
    for (auto s : kAllStrategies) {
        EXPECT_EQ(parse_strategy(to_string(s)), s);
    }
    EXPECT_THROW((void)parse_strategy("murr"), ConfigError);
    EXPECT_TRUE(uses_replay(Strategy::MurrLM));
    EXPECT_FALSE(uses_replay(Strategy::CFNoReplay));
    EXPECT_TRUE(starts_from_base(Strategy::LMNoReplay));
    EXPECT_FALSE(starts_from_base(Strategy::MurrCF));
}

TEST(Strategies, ZeroStepsReturnsStartingPoint) {
    Rng rng(15);
    auto triples = random_triples(rng, 5);
    auto base = EncoderModel::random_init(murr::testing::small_dims(), 1);
    auto prev = EncoderModel::random_init(murr::testing::small_dims(), 2);
    auto items = sample_replay(triples, prev, 3, 1, 0);
    EXPECT_TRUE(train_session(Strategy::MurrCF, prev, base, triples, items, small_train(0), 1).same_parameters(prev));
    EXPECT_TRUE(train_session(Strategy::MurrLM, prev, base, triples, items, small_train(0), 1).same_parameters(base));
}

TEST(Strategies, DegenerateMurrEqualsCfWithoutReplay) {
    Rng rng(16);
    auto triples = random_triples(rng, 8);
    auto base = EncoderModel::random_init(murr::testing::small_dims(), 1);
    auto prev = train_session(Strategy::CFNoReplay, base, base, triples, {}, small_train(5), 0);
    auto cf = train_session(Strategy::CFNoReplay, prev, base, triples, {}, small_train(10), 1);
    auto murr_empty = train_session(Strategy::MurrCF, prev, base, triples, {}, small_train(10), 1);
    EXPECT_TRUE(murr_empty.same_parameters(cf));
    EXPECT_EQ(murr_empty.version(), "s1-murr-cf");

    // alpha = 0 keeps replay triples in the contrastive pool, so the result differs.
    auto items = sample_replay(triples, prev, 3, 1, 0);
    auto cfg = small_train(10);
    cfg.alpha = 0.0;
    EXPECT_FALSE(train_session(Strategy::MurrCF, prev, base, triples, items, cfg, 1).same_parameters(cf));
    // CF ignores any replay handed to it.
    EXPECT_TRUE(train_session(Strategy::CFNoReplay, prev, base, triples, items, small_train(10), 1).same_parameters(cf));
}

TEST(Strategies, SessionZeroIsSharedAndLaterSessionsDiverge) {
    Rng rng(17);
    auto triples = random_triples(rng, 8);
    auto base = EncoderModel::random_init(murr::testing::small_dims(), 1);
    auto first = train_session(Strategy::SameModel, base, base, triples, {}, small_train(5), 0);
    EXPECT_EQ(first.version(), "s0-shared");
    for (auto s : kAllStrategies) {
        EXPECT_TRUE(train_session(s, base, base, triples, {}, small_train(5), 0).same_parameters(first));
    }
    auto same = train_session(Strategy::SameModel, first, base, triples, {}, small_train(5), 1);
    EXPECT_TRUE(same.same_parameters(first));
    auto lm = train_session(Strategy::LMNoReplay, first, base, triples, {}, small_train(5), 1);
    auto from_base = train_session(Strategy::CFNoReplay, base, base, triples, {}, small_train(5), 1);
    EXPECT_TRUE(lm.same_parameters(from_base));
    EXPECT_THROW((void)train_session(Strategy::MurrCF, first, EncoderModel::random_init({}, 1), triples, {},
                                     small_train(5), 1),
                 ConfigError);
}

TEST(Pretrain, ZeroStepsIsSeededRandomInit) {
    auto cfg = small_train(0);
    auto a = pretrain_base({}, cfg, murr::testing::small_dims());
    auto b = pretrain_base({}, cfg, murr::testing::small_dims());
    EXPECT_TRUE(a.same_parameters(b));
    EXPECT_TRUE(a.same_parameters(EncoderModel::random_init(murr::testing::small_dims(), derive_seed(cfg.seed, "base-init"))));
    EXPECT_EQ(a.version(), "base");
}

TEST(Pretrain, BaseBeatsShuffledRankingOnHeldOutQueries) {
    SyntheticSpec spec;
    SyntheticDomainSpec d;
    d.name = "generic";
    d.n_topics = 60;
    spec.domains.push_back(d);
    auto corpus = generate_synthetic_corpus(spec, 5);
    auto triples = resolve_triples(corpus, make_training_triples(corpus, "generic", 5));
    TrainConfig cfg;
    cfg.steps = 300;
    cfg.seed = 5;
    auto base = pretrain_base(triples, cfg);

    std::vector<Document const*> docs;
    for (auto const& doc : corpus.documents()) {
        if (doc.split == Split::Test) {
            docs.push_back(&doc);
        }
    }
    auto shard = build_shard(base, docs, IndexMode::Flat, 8, 0, 0);
    std::vector<std::string> ids;
    for (auto const* doc : docs) {
        ids.push_back(doc->id);
    }
    Rng rng(99);
    double model_hits = 0.0;
    double shuffled_hits = 0.0;
    std::size_t n = 0;
    for (auto const& q : corpus.queries()) {
        if (q.split != Split::Test) {
            continue;
        }
        ++n;
        model_hits += success_at_5(search_shard(shard, encode(base, q.text), 5), corpus.relevant(q.id));
        for (int rep = 0; rep < 20; ++rep) {
            auto order = ids;
            rng.shuffle(order);
            RankedList ranked;
            for (std::size_t i = 0; i < 5; ++i) {
                ranked.push_back({order[i], 0.0});
            }
            shuffled_hits += success_at_5(ranked, corpus.relevant(q.id)) / 20.0;
        }
    }
    EXPECT_GT(model_hits / n, shuffled_hits / n + 0.1);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
    TrainConfig c;
    c.steps = 7;
    c.alpha = 0.5;
    c.replay_k = 3;
    auto back = nlohmann::json(c).get<TrainConfig>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
    auto partial = nlohmann::json::parse(R"({"steps": 5})").get<TrainConfig>();
    EXPECT_EQ(partial.steps, 5U);
    EXPECT_EQ(partial.alpha, TrainConfig{}.alpha);
    c.alpha = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.adam_beta1 = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}
