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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "murr/binary_io.hpp"
#include "murr/corpus.hpp"
#include "murr/encoder.hpp"
#include "murr/error.hpp"
#include "murr/random.hpp"

namespace murr {

struct TrainingTriple {
    std::string query;
    std::string pos;
    std::string neg;

    auto operator==(TrainingTriple const&) const -> bool = default;
};

[[nodiscard]] inline auto resolve_triples(Corpus const& corpus, std::span<TripleIds const> ids)
    -> std::vector<TrainingTriple> {
    std::vector<TrainingTriple> out;
    out.reserve(ids.size());
    for (auto const& t : ids) {
        if (t.pos_doc_id == t.neg_doc_id) {
            throw ValidationError("triple for " + t.query_id + " uses the same document as positive and negative");
        }
        out.push_back(TrainingTriple{corpus.query(t.query_id).text, corpus.document(t.pos_doc_id).text,
                                     corpus.document(t.neg_doc_id).text});
    }
    return out;
}

/// A retained triple with the document vectors produced by the model that finished its origin session.
struct ReplayItem {
    TrainingTriple triple;
    std::uint32_t origin_session = 0;
    Vector pos_anchor;
    Vector neg_anchor;

    auto operator==(ReplayItem const&) const -> bool = default;
};

/// Union of per-session replay samples, at most `per_session_limit` items per origin session.
class ReplaySet {
  public:
    explicit ReplaySet(std::size_t per_session_limit = 32) : m_limit(per_session_limit) {}

    void add(std::vector<ReplayItem> items) {
        for (auto& item : items) {
            auto& count = m_counts[item.origin_session];
            if (count >= m_limit) {
                throw std::logic_error("replay set: more than " + std::to_string(m_limit) +
                                       " items for session " + std::to_string(item.origin_session));
            }
            ++count;
            m_items.push_back(std::move(item));
        }
    }

    [[nodiscard]] auto items() const noexcept -> std::span<ReplayItem const> { return m_items; }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return m_items.size(); }
    [[nodiscard]] auto empty() const noexcept -> bool { return m_items.empty(); }
    [[nodiscard]] auto per_session_limit() const noexcept -> std::size_t { return m_limit; }
    [[nodiscard]] auto count_for(std::uint32_t session) const -> std::size_t {
        auto it = m_counts.find(session);
        return it == m_counts.end() ? 0 : it->second;
    }

  private:
    std::size_t m_limit;
    std::vector<ReplayItem> m_items;
    std::map<std::uint32_t, std::size_t> m_counts;
};

enum class Strategy : std::uint8_t { SameModel, LMNoReplay, CFNoReplay, MurrLM, MurrCF };

inline constexpr std::array<Strategy, 5> kAllStrategies = {Strategy::SameModel, Strategy::LMNoReplay,
                                                          Strategy::CFNoReplay, Strategy::MurrLM, Strategy::MurrCF};

[[nodiscard]] inline auto to_string(Strategy s) -> std::string_view {
    switch (s) {
        case Strategy::SameModel: return "same-model";
        case Strategy::LMNoReplay: return "lm-no-replay";
        case Strategy::CFNoReplay: return "cf-no-replay";
        case Strategy::MurrLM: return "murr-lm";
        case Strategy::MurrCF: return "murr-cf";
    }
    return "unknown";
}

[[nodiscard]] inline auto parse_strategy(std::string_view text) -> Strategy {
    for (auto s : kAllStrategies) {
        if (to_string(s) == text) {
            return s;
        }
    }
    throw ConfigError("unknown strategy: " + std::string(text) +
                      " (expected same-model, lm-no-replay, cf-no-replay, murr-lm or murr-cf)");
}

[[nodiscard]] constexpr auto uses_replay(Strategy s) noexcept -> bool {
    return s == Strategy::MurrLM || s == Strategy::MurrCF;
}
[[nodiscard]] constexpr auto starts_from_base(Strategy s) noexcept -> bool {
    return s == Strategy::LMNoReplay || s == Strategy::MurrLM;
}

/// Desk-scale defaults. The reference large-model setting used 20000 steps, batch 256,
/// lr 3e-6 and 200 retained triples per session.
struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double alpha = 0.01;
    std::size_t replay_k = 32;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha >= 0.0)) {
            throw ConfigError("train config: alpha must be >= 0");
        }
        if (batch_size == 0) {
            throw ConfigError("train config: batch_size must be >= 1");
        }
        if (!(learning_rate >= 0.0)) {
            throw ConfigError("train config: learning_rate must be >= 0");
        }
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
            throw ConfigError("train config: adam betas must lie in [0, 1)");
        }
        if (!(adam_eps > 0.0)) {
            throw ConfigError("train config: adam_eps must be positive");
        }
    }
};

inline void to_json(nlohmann::json& j, TrainConfig const& c) {
    j = nlohmann::json{{"steps", c.steps},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
                       {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2}, {"adam_eps", c.adam_eps},
                       {"alpha", c.alpha},         {"replay_k", c.replay_k},     {"seed", c.seed}};
}

inline void from_json(nlohmann::json const& j, TrainConfig& c) {
    c = TrainConfig{};
    auto opt = [&](char const* key, auto& out) {
        if (j.contains(key)) {
            j.at(key).get_to(out);
        }
    };
    opt("steps", c.steps);
    opt("batch_size", c.batch_size);
    opt("learning_rate", c.learning_rate);
    opt("adam_beta1", c.adam_beta1);
    opt("adam_beta2", c.adam_beta2);
    opt("adam_eps", c.adam_eps);
    opt("alpha", c.alpha);
    opt("replay_k", c.replay_k);
    opt("seed", c.seed);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

/// log(1 + e^x) without overflow.
[[nodiscard]] inline auto softplus(double x) noexcept -> double {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

[[nodiscard]] inline auto sigmoid(double x) noexcept -> double {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double const e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {
    struct Workspace {
        ForwardCache q;
        ForwardCache pos;
        ForwardCache neg;
        Vector g_q;
        Vector g_pos;
        Vector g_neg;
        BackwardScratch scratch;
        // Hashed tokens keyed by the address of the text; valid while the triples outlive the workspace.
        std::unordered_map<std::string const*, std::vector<std::uint32_t>> tokens;
    };

    inline void forward_cached(EncoderModel const& model, std::string const& text, ForwardCache& cache,
                               Workspace& ws) {
        auto it = ws.tokens.find(&text);
        if (it == ws.tokens.end()) {
            it = ws.tokens.emplace(&text, tokenize(text, model.dims().vocab)).first;
        }
        forward_tokens(model, it->second, cache);
    }

    /// Adds scale * d(softplus(f(q,d-) - f(q,d+)))/d(theta) into grad and returns the unscaled loss.
    inline auto accumulate_contrastive(EncoderModel const& model, TrainingTriple const& t, double scale,
                                       std::span<double> grad, Workspace& ws) -> double {
        forward_cached(model, t.query, ws.q, ws);
        forward_cached(model, t.pos, ws.pos, ws);
        forward_cached(model, t.neg, ws.neg, ws);
        double const sp = similarity(ws.q.output, ws.pos.output);
        double const sn = similarity(ws.q.output, ws.neg.output);
        double const margin = sn - sp;
        double const g = scale * sigmoid(margin);
        std::size_t const n = ws.q.output.size();
        ws.g_q.resize(n);
        ws.g_pos.resize(n);
        ws.g_neg.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ws.g_q[i] = g * (ws.neg.output[i] - ws.pos.output[i]);
            ws.g_pos[i] = -g * ws.q.output[i];
            ws.g_neg[i] = g * ws.q.output[i];
        }
        backward(model, ws.q, ws.g_q, grad, ws.scratch);
        backward(model, ws.pos, ws.g_pos, grad, ws.scratch);
        backward(model, ws.neg, ws.g_neg, grad, ws.scratch);
        return softplus(margin);
    }

    /// Adds scale * d(||enc(text) - anchor||)/d(theta) into grad and returns the unscaled norm.
    /// The gradient at a zero difference is the zero subgradient.
    inline auto accumulate_anchor_distance(EncoderModel const& model, std::string const& text, Vector const& anchor,
                                           double scale, std::span<double> grad, ForwardCache& cache, Vector& g_out,
                                           Workspace& ws) -> double {
        forward_cached(model, text, cache, ws);
        if (anchor.size() != cache.output.size()) {
            throw std::invalid_argument("replay anchor dimension does not match the encoder output");
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < anchor.size(); ++i) {
            double const diff = cache.output[i] - anchor[i];
            sq += diff * diff;
        }
        double const norm = std::sqrt(sq);
        if (norm == 0.0 || scale == 0.0) {
            return norm;
        }
        g_out.resize(anchor.size());
        for (std::size_t i = 0; i < anchor.size(); ++i) {
            g_out[i] = scale * (cache.output[i] - anchor[i]) / norm;
        }
        backward(model, cache, g_out, grad, ws.scratch);
        return norm;
    }

    inline auto contrastive_into(EncoderModel const& model, std::span<TrainingTriple const* const> batch,
                                 std::span<double> grad, Workspace& ws) -> double {
        double const scale = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (auto const* t : batch) {
            loss += accumulate_contrastive(model, *t, scale, grad, ws);
        }
        return loss * scale;
    }

    inline auto regularization_into(EncoderModel const& model, std::span<ReplayItem const* const> batch,
                                    double weight, std::span<double> grad, Workspace& ws) -> double {
        double const scale = 1.0 / (2.0 * static_cast<double>(batch.size()));
        double loss = 0.0;
        for (auto const* item : batch) {
            loss += accumulate_anchor_distance(model, item->triple.pos, item->pos_anchor, weight * scale, grad, ws.pos,
                                               ws.g_pos, ws);
            loss += accumulate_anchor_distance(model, item->triple.neg, item->neg_anchor, weight * scale, grad, ws.neg,
                                               ws.g_neg, ws);
        }
        return loss * scale;
    }

    template <typename T>
    auto pointers(std::span<T const> items) -> std::vector<T const*> {
        std::vector<T const*> out;
        out.reserve(items.size());
        for (auto const& x : items) {
            out.push_back(&x);
        }
        return out;
    }
}  // namespace detail

/// Mean over triples of -log softmax of the positive against the negative, i.e.
/// softplus(f(q,d-) - f(q,d+)), with its analytic gradient.
[[nodiscard]] inline auto contrastive_loss(EncoderModel const& model, std::span<TrainingTriple const> batch)
    -> LossAndGradient {
    if (batch.empty()) {
        throw std::invalid_argument("contrastive_loss: empty batch");
    }
    LossAndGradient out{0.0, std::vector<double>(model.params().size(), 0.0)};
    detail::Workspace ws;
    auto ptrs = detail::pointers(batch);
    out.loss = detail::contrastive_into(model, ptrs, out.grad, ws);
    return out;
}

/// (1 / 2n) * sum over items of ||enc(d+) - anchor+|| + ||enc(d-) - anchor-|| (unsquared L2).
[[nodiscard]] inline auto regularization_loss(EncoderModel const& model, std::span<ReplayItem const> batch)
    -> LossAndGradient {
    if (batch.empty()) {
        throw std::invalid_argument("regularization_loss: empty batch");
    }
    LossAndGradient out{0.0, std::vector<double>(model.params().size(), 0.0)};
    detail::Workspace ws;
    auto ptrs = detail::pointers(batch);
    out.loss = detail::regularization_into(model, ptrs, 1.0, out.grad, ws);
    return out;
}

namespace detail {
    inline auto total_into(EncoderModel const& model, std::span<TrainingTriple const* const> session_batch,
                           std::span<ReplayItem const* const> replay_batch, double alpha, std::span<double> grad,
                           Workspace& ws) -> double {
        std::vector<TrainingTriple const*> all(session_batch.begin(), session_batch.end());
        for (auto const* item : replay_batch) {
            all.push_back(&item->triple);
        }
        if (all.empty()) {
            throw std::invalid_argument("total_loss: empty batch");
        }
        double loss = contrastive_into(model, all, grad, ws);
        if (!replay_batch.empty() && alpha != 0.0) {
            loss += alpha * regularization_into(model, replay_batch, alpha, grad, ws);
        }
        return loss;
    }
}  // namespace detail

/// L_C(session ∪ replay triples) + alpha * L_R(replay). Without replay items this is L_C alone.
[[nodiscard]] inline auto total_loss(EncoderModel const& model, std::span<TrainingTriple const> session_batch,
                                     std::span<ReplayItem const> replay_batch, double alpha) -> LossAndGradient {
    if (!(alpha >= 0.0)) {
        throw std::invalid_argument("total_loss: alpha must be >= 0");
    }
    LossAndGradient out{0.0, std::vector<double>(model.params().size(), 0.0)};
    detail::Workspace ws;
    auto s = detail::pointers(session_batch);
    auto r = detail::pointers(replay_batch);
    out.loss = detail::total_into(model, s, r, alpha, out.grad, ws);
    return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. State is sized to the parameter vector on construction.
class AdamState {
  public:
    explicit AdamState(std::size_t n, AdamHyper hyper = {}) : m_hyper(hyper), m_first(n, 0.0), m_second(n, 0.0) {}

    void step(std::span<double> params, std::span<double const> grad, double lr) {
        if (params.size() != m_first.size() || grad.size() != m_first.size()) {
            throw std::invalid_argument("adam: state size does not match the parameters");
        }
        bool finite = true;
        for (double g : grad) {
            finite &= std::isfinite(g);
        }
        if (!finite) {
            auto const bad = std::find_if(grad.begin(), grad.end(), [](double g) { return !std::isfinite(g); });
            throw TrainingError("adam: non-finite gradient at parameter " +
                                std::to_string(std::distance(grad.begin(), bad)) + " (step " +
                                std::to_string(m_t + 1) + ")");
        }
        ++m_t;
        double const b1 = m_hyper.beta1;
        double const b2 = m_hyper.beta2;
        double const c1 = 1.0 - std::pow(b1, static_cast<double>(m_t));
        double const c2 = 1.0 - std::pow(b2, static_cast<double>(m_t));
        double const eps = m_hyper.eps;
        double* __restrict p = params.data();
        double* __restrict mf = m_first.data();
        double* __restrict vs = m_second.data();
        double const* __restrict gs = grad.data();
        std::size_t const n = grad.size();
        for (std::size_t i = 0; i < n; ++i) {
            double const g = gs[i];
            double const m = b1 * mf[i] + (1.0 - b1) * g;
            double const v = b2 * vs[i] + (1.0 - b2) * g * g;
            mf[i] = m;
            vs[i] = v;
            p[i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
        }
    }

    [[nodiscard]] auto steps_taken() const noexcept -> std::uint64_t { return m_t; }

  private:
    AdamHyper m_hyper;
    std::vector<double> m_first;
    std::vector<double> m_second;
    std::uint64_t m_t = 0;
};

// ---------------------------------------------------------------------------
// Session training
// ---------------------------------------------------------------------------

namespace detail {
    /// Minibatch SGD over a pool of session triples followed by replay items.
    inline void optimize(EncoderModel& model, std::span<TrainingTriple const> triples,
                         std::span<ReplayItem const> replay, double alpha, TrainConfig const& config,
                         std::uint64_t batch_seed) {
        std::size_t const pool = triples.size() + replay.size();
        if (config.steps == 0) {
            return;
        }
        if (pool == 0) {
            warn("training requested with no triples; model left unchanged");
            return;
        }
        std::size_t const batch = std::min(config.batch_size, pool);
        Rng rng(batch_seed);
        std::vector<std::size_t> order(pool);
        for (std::size_t i = 0; i < pool; ++i) {
            order[i] = i;
        }
        rng.shuffle(order);
        std::size_t cursor = 0;

        AdamState adam(model.params().size(), AdamHyper{config.adam_beta1, config.adam_beta2, config.adam_eps});
        std::vector<double> grad(model.params().size());
        Workspace ws;
        std::vector<TrainingTriple const*> session_batch;
        std::vector<ReplayItem const*> replay_batch;
        for (std::size_t step = 0; step < config.steps; ++step) {
            session_batch.clear();
            replay_batch.clear();
            for (std::size_t b = 0; b < batch; ++b) {
                if (cursor == pool) {
                    rng.shuffle(order);
                    cursor = 0;
                }
                std::size_t const idx = order[cursor++];
                if (idx < triples.size()) {
                    session_batch.push_back(&triples[idx]);
                } else {
                    replay_batch.push_back(&replay[idx - triples.size()]);
                }
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            total_into(model, session_batch, replay_batch, alpha, grad, ws);
            adam.step(model.params(), grad, config.learning_rate);
        }
    }
}  // namespace detail

/// Produces M_s for one session.
///
/// Session 0 trains every strategy from the base model on the session triples. Later sessions:
///   same-model    returns prev_model untouched
///   lm-no-replay  base model, contrastive loss on the session triples
///   cf-no-replay  prev_model, contrastive loss on the session triples
///   murr-lm       base model, contrastive loss on session ∪ replay + alpha * regularization
///   murr-cf       prev_model, same loss as murr-lm
/// Replay items join the shuffled batch stream; each batch regularizes exactly the replay
/// items it contains.
[[nodiscard]] inline auto train_session(Strategy strategy, EncoderModel const& prev_model,
                                        EncoderModel const& base_model, std::span<TrainingTriple const> triples,
                                        std::span<ReplayItem const> replay, TrainConfig const& config,
                                        std::size_t session) -> EncoderModel {
    config.validate();
    if (!(prev_model.dims() == base_model.dims())) {
        throw ConfigError("train_session: previous and base models have different dimensions");
    }
    if (session > 0 && strategy == Strategy::SameModel) {
        return prev_model;
    }
    bool const from_base = session == 0 || starts_from_base(strategy);
    EncoderModel model = from_base ? base_model : prev_model;
    auto const used_replay =
        (session > 0 && uses_replay(strategy)) ? replay : std::span<ReplayItem const>{};
    detail::optimize(model, triples, used_replay, config.alpha, config, derive_seed(config.seed, "batches", session));
    if (!model.all_finite()) {
        throw TrainingError("train_session: non-finite parameters after session " + std::to_string(session));
    }
    model.set_version("s" + std::to_string(session) + "-" +
                      std::string(session == 0 ? std::string_view("shared") : to_string(strategy)));
    return model;
}

/// Random init followed by contrastive training on a generic triple set; the frozen base checkpoint.
[[nodiscard]] inline auto pretrain_base(std::span<TrainingTriple const> generic_triples, TrainConfig const& config,
                                        EncoderDims dims = {}) -> EncoderModel {
    config.validate();
    auto model = EncoderModel::random_init(dims, derive_seed(config.seed, "base-init"), "base");
    detail::optimize(model, generic_triples, {}, 0.0, config, derive_seed(config.seed, "pretrain-batches"));
    model.set_version("base");
    return model;
}

/// Simple random sample of min(k, |triples|) triples with anchors encoded by the trained model.
[[nodiscard]] inline auto sample_replay(std::span<TrainingTriple const> triples, EncoderModel const& trained,
                                        std::size_t k, std::uint64_t seed, std::uint32_t origin_session)
    -> std::vector<ReplayItem> {
    Rng rng(derive_seed(seed, "replay", origin_session));
    auto picks = rng.sample_without_replacement(triples.size(), k);
    std::vector<ReplayItem> out;
    out.reserve(picks.size());
    for (auto i : picks) {
        ReplayItem item;
        item.triple = triples[i];
        item.origin_session = origin_session;
        item.pos_anchor = encode(trained, item.triple.pos);
        item.neg_anchor = encode(trained, item.triple.neg);
        out.push_back(std::move(item));
    }
    return out;
}

/// Mean L2 distance between the model's current encodings of replayed documents and their anchors.
[[nodiscard]] inline auto mean_anchor_drift(EncoderModel const& model, std::span<ReplayItem const> items) -> double {
    if (items.empty()) {
        return 0.0;
    }
    auto dist = [&](std::string const& text, Vector const& anchor) {
        auto v = encode(model, text);
        double sq = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            sq += (v[i] - anchor[i]) * (v[i] - anchor[i]);
        }
        return std::sqrt(sq);
    };
    double total = 0.0;
    for (auto const& item : items) {
        total += dist(item.triple.pos, item.pos_anchor) + dist(item.triple.neg, item.neg_anchor);
    }
    return total / (2.0 * static_cast<double>(items.size()));
}

// Replay buffer: "MURRRPL1", d_out (u32), item count (u64), then per item: origin session (u32),
// query/pos/neg texts (u32 length + UTF-8), pos and neg anchors (d_out f64 each).
inline constexpr std::string_view kReplayMagic = "MURRRPL1";

inline void save_replay(std::span<ReplayItem const> items, std::uint32_t d_out, std::filesystem::path const& path) {
    io::Writer w;
    w.magic(kReplayMagic);
    w.u32(d_out);
    w.u64(items.size());
    for (auto const& item : items) {
        if (item.pos_anchor.size() != d_out || item.neg_anchor.size() != d_out) {
            throw std::invalid_argument("save_replay: anchor dimension mismatch");
        }
        w.u32(item.origin_session);
        w.str(item.triple.query);
        w.str(item.triple.pos);
        w.str(item.triple.neg);
        w.f64s(item.pos_anchor);
        w.f64s(item.neg_anchor);
    }
    w.save(path);
}

[[nodiscard]] inline auto load_replay(std::filesystem::path const& path) -> std::vector<ReplayItem> {
    auto r = io::Reader::from_file(path);
    r.expect_magic(kReplayMagic);
    auto const d_out = r.u32();
    auto const count = r.u64();
    std::vector<ReplayItem> items;
    for (std::uint64_t i = 0; i < count; ++i) {
        ReplayItem item;
        item.origin_session = r.u32();
        item.triple.query = r.str();
        item.triple.pos = r.str();
        item.triple.neg = r.str();
        item.pos_anchor.resize(d_out);
        item.neg_anchor.resize(d_out);
        r.f64s(item.pos_anchor);
        r.f64s(item.neg_anchor);
        items.push_back(std::move(item));
    }
    r.expect_end();
    return items;
}

}  // namespace murr
