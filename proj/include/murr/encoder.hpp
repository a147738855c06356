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

#include <cassert>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "murr/binary_io.hpp"
#include "murr/error.hpp"
#include "murr/random.hpp"

namespace murr {

using Vector = std::vector<double>;

struct EncoderDims {
    std::uint32_t vocab = 4096;
    std::uint32_t emb = 64;
    std::uint32_t hidden = 64;
    std::uint32_t out = 32;

    auto operator==(EncoderDims const&) const -> bool = default;

    [[nodiscard]] auto parameter_count() const noexcept -> std::size_t {
        return std::size_t{vocab} * emb + std::size_t{hidden} * emb + hidden + std::size_t{out} * hidden + out;
    }
};

// FNV-1a 64-bit. Committed constants: the token -> id map is part of the checkpoint contract.
inline constexpr std::uint64_t kTokenHashOffset = 0xCBF29CE484222325ULL;
inline constexpr std::uint64_t kTokenHashPrime = 0x00000100000001B3ULL;

[[nodiscard]] constexpr auto token_hash(std::string_view token) noexcept -> std::uint64_t {
    std::uint64_t h = kTokenHashOffset;
    for (char c : token) {
        h = (h ^ static_cast<unsigned char>(c)) * kTokenHashPrime;
    }
    return h;
}

/// Lowercases ASCII, splits on runs of non-alphanumeric ASCII bytes and hashes each token into [0, vocab).
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
[[nodiscard]] inline auto tokenize(std::string_view text, std::uint32_t vocab) -> std::vector<std::uint32_t> {
    std::vector<std::uint32_t> ids;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            ids.push_back(static_cast<std::uint32_t>(token_hash(token) % vocab));
            token.clear();
        }
    };
    for (char ch : text) {
        auto const c = static_cast<unsigned char>(ch);
        bool const alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (!alnum) {
            flush();
            continue;
        }
        token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    }
    flush();
    return ids;
}

/// Hashed bag-of-tokens dual encoder: v = W2 tanh(W1 mean(Emb[tokens]) + b1) + b2.
///
/// Parameters live in one flat buffer in checkpoint order (Emb, W1, b1, W2, b2); all
/// matrices are row-major. Queries and documents share the same parameters.
class EncoderModel {
  public:
    EncoderModel() = default;

    explicit EncoderModel(EncoderDims dims, std::string version = {})
        : m_dims(dims), m_version(std::move(version)), m_params(dims.parameter_count(), 0.0) {
        if (dims.vocab == 0 || dims.emb == 0 || dims.hidden == 0 || dims.out == 0) {
            throw ConfigError("encoder dimensions must be positive");
        }
    }

    /// Gaussian init: Emb ~ N(0, 1), W1 ~ N(0, 1/emb), W2 ~ N(0, 1/hidden), zero biases.
    static auto random_init(EncoderDims dims, std::uint64_t seed, std::string version = "init") -> EncoderModel {
        EncoderModel m(dims, std::move(version));
        Rng rng(derive_seed(seed, "encoder-init"));
        for (double& x : m.emb()) {
            x = rng.normal();
        }
        double const s1 = 1.0 / std::sqrt(static_cast<double>(dims.emb));
        for (double& x : m.w1()) {
            x = s1 * rng.normal();
        }
        double const s2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
        for (double& x : m.w2()) {
            x = s2 * rng.normal();
        }
        return m;
    }

    [[nodiscard]] auto dims() const noexcept -> EncoderDims const& { return m_dims; }
    [[nodiscard]] auto version() const noexcept -> std::string const& { return m_version; }
    void set_version(std::string version) { m_version = std::move(version); }

    [[nodiscard]] auto params() noexcept -> std::span<double> { return m_params; }
    [[nodiscard]] auto params() const noexcept -> std::span<double const> { return m_params; }

    [[nodiscard]] auto emb() noexcept -> std::span<double> { return block(emb_offset(), emb_size()); }
    [[nodiscard]] auto w1() noexcept -> std::span<double> { return block(w1_offset(), w1_size()); }
    [[nodiscard]] auto b1() noexcept -> std::span<double> { return block(b1_offset(), m_dims.hidden); }
    [[nodiscard]] auto w2() noexcept -> std::span<double> { return block(w2_offset(), w2_size()); }
    [[nodiscard]] auto b2() noexcept -> std::span<double> { return block(b2_offset(), m_dims.out); }
    [[nodiscard]] auto emb() const noexcept -> std::span<double const> { return block(emb_offset(), emb_size()); }
    [[nodiscard]] auto w1() const noexcept -> std::span<double const> { return block(w1_offset(), w1_size()); }
    [[nodiscard]] auto b1() const noexcept -> std::span<double const> { return block(b1_offset(), m_dims.hidden); }
    [[nodiscard]] auto w2() const noexcept -> std::span<double const> { return block(w2_offset(), w2_size()); }
    [[nodiscard]] auto b2() const noexcept -> std::span<double const> { return block(b2_offset(), m_dims.out); }

    [[nodiscard]] auto emb_offset() const noexcept -> std::size_t { return 0; }
    [[nodiscard]] auto w1_offset() const noexcept -> std::size_t { return emb_size(); }
    [[nodiscard]] auto b1_offset() const noexcept -> std::size_t { return w1_offset() + w1_size(); }
    [[nodiscard]] auto w2_offset() const noexcept -> std::size_t { return b1_offset() + m_dims.hidden; }
    [[nodiscard]] auto b2_offset() const noexcept -> std::size_t { return w2_offset() + w2_size(); }

    [[nodiscard]] auto all_finite() const -> bool {
        for (double x : m_params) {
            if (!std::isfinite(x)) {
                return false;
            }
        }
        return true;
    }

    /// Same dimensions and bit-identical parameters (the version tag is ignored).
    [[nodiscard]] auto same_parameters(EncoderModel const& other) const -> bool {
        return m_dims == other.m_dims && m_params == other.m_params;
    }

  private:
    [[nodiscard]] auto emb_size() const noexcept -> std::size_t { return std::size_t{m_dims.vocab} * m_dims.emb; }
    [[nodiscard]] auto w1_size() const noexcept -> std::size_t { return std::size_t{m_dims.hidden} * m_dims.emb; }
    [[nodiscard]] auto w2_size() const noexcept -> std::size_t { return std::size_t{m_dims.out} * m_dims.hidden; }
    auto block(std::size_t offset, std::size_t size) noexcept -> std::span<double> {
        return std::span<double>(m_params).subspan(offset, size);
    }
    [[nodiscard]] auto block(std::size_t offset, std::size_t size) const noexcept -> std::span<double const> {
        return std::span<double const>(m_params).subspan(offset, size);
    }

    EncoderDims m_dims{};
    std::string m_version;
    std::vector<double> m_params;
};

/// Intermediate activations of one forward pass, kept for backpropagation.
struct ForwardCache {
    std::vector<std::uint32_t> tokens;
    Vector pooled;  // mean embedding
    Vector hidden;  // tanh activations
    Vector output;
};

/// Forward pass over already-hashed token ids.
inline void forward_tokens(EncoderModel const& model, std::span<std::uint32_t const> tokens, ForwardCache& cache) {
    auto const& d = model.dims();
    cache.tokens.assign(tokens.begin(), tokens.end());
    cache.pooled.assign(d.emb, 0.0);
    auto const emb = model.emb();
    for (auto t : cache.tokens) {
        auto const row = emb.subspan(std::size_t{t} * d.emb, d.emb);
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            cache.pooled[j] += row[j];
        }
    }
    if (!cache.tokens.empty()) {
        double const inv = 1.0 / static_cast<double>(cache.tokens.size());
        for (double& x : cache.pooled) {
            x *= inv;
        }
    }
    cache.hidden.resize(d.hidden);
    auto const w1 = model.w1();
    auto const b1 = model.b1();
    for (std::uint32_t i = 0; i < d.hidden; ++i) {
        double acc = b1[i];
        auto const row = w1.subspan(std::size_t{i} * d.emb, d.emb);
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            acc += row[j] * cache.pooled[j];
        }
        cache.hidden[i] = std::tanh(acc);
    }
    cache.output.resize(d.out);
    auto const w2 = model.w2();
    auto const b2 = model.b2();
    for (std::uint32_t i = 0; i < d.out; ++i) {
        double acc = b2[i];
        auto const row = w2.subspan(std::size_t{i} * d.hidden, d.hidden);
        for (std::uint32_t j = 0; j < d.hidden; ++j) {
            acc += row[j] * cache.hidden[j];
        }
        cache.output[i] = acc;
    }
}

inline void forward(EncoderModel const& model, std::string_view text, ForwardCache& cache) {
    auto const tokens = tokenize(text, model.dims().vocab);
    forward_tokens(model, tokens, cache);
}

/// Scratch buffers for backward(); reused across calls to avoid allocation.
struct BackwardScratch {
    Vector grad_hidden;
    Vector grad_pooled;
};

/// Accumulates d(loss)/d(theta) into grad (flat, model layout) given d(loss)/d(output).
inline void backward(EncoderModel const& model, ForwardCache const& cache, std::span<double const> grad_output,
                     std::span<double> grad, BackwardScratch& scratch) {
    auto const& d = model.dims();
    assert(grad.size() == model.params().size());
    auto const w2 = model.w2();
    auto const w1 = model.w1();
    auto g_w2 = grad.subspan(model.w2_offset(), std::size_t{d.out} * d.hidden);
    auto g_b2 = grad.subspan(model.b2_offset(), d.out);
    auto& grad_hidden = scratch.grad_hidden;
    grad_hidden.assign(d.hidden, 0.0);
    for (std::uint32_t i = 0; i < d.out; ++i) {
        double const g = grad_output[i];
        if (g == 0.0) {
            continue;
        }
        g_b2[i] += g;
        auto const row = w2.subspan(std::size_t{i} * d.hidden, d.hidden);
        auto g_row = g_w2.subspan(std::size_t{i} * d.hidden, d.hidden);
        for (std::uint32_t j = 0; j < d.hidden; ++j) {
            g_row[j] += g * cache.hidden[j];
            grad_hidden[j] += g * row[j];
        }
    }
    auto g_w1 = grad.subspan(model.w1_offset(), std::size_t{d.hidden} * d.emb);
    auto g_b1 = grad.subspan(model.b1_offset(), d.hidden);
    auto& grad_pooled = scratch.grad_pooled;
    grad_pooled.assign(d.emb, 0.0);
    for (std::uint32_t i = 0; i < d.hidden; ++i) {
        double const h = cache.hidden[i];
        double const g = grad_hidden[i] * (1.0 - h * h);
        g_b1[i] += g;
        auto const row = w1.subspan(std::size_t{i} * d.emb, d.emb);
        auto g_row = g_w1.subspan(std::size_t{i} * d.emb, d.emb);
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            g_row[j] += g * cache.pooled[j];
            grad_pooled[j] += g * row[j];
        }
    }
    if (cache.tokens.empty()) {
        return;
    }
    double const inv = 1.0 / static_cast<double>(cache.tokens.size());
    auto g_emb = grad.subspan(model.emb_offset(), std::size_t{d.vocab} * d.emb);
    for (auto t : cache.tokens) {
        auto g_row = g_emb.subspan(std::size_t{t} * d.emb, d.emb);
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            g_row[j] += inv * grad_pooled[j];
        }
    }
}

inline void backward(EncoderModel const& model, ForwardCache const& cache, std::span<double const> grad_output,
                     std::span<double> grad) {
    BackwardScratch scratch;
    backward(model, cache, grad_output, grad, scratch);
}

[[nodiscard]] inline auto encode(EncoderModel const& model, std::string_view text) -> Vector {
    ForwardCache cache;
    forward(model, text, cache);
    return std::move(cache.output);
}

/// Dot product.
[[nodiscard]] inline auto similarity(std::span<double const> q, std::span<double const> d) -> double {
    if (q.size() != d.size()) {
        throw std::invalid_argument("similarity: dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        acc += q[i] * d[i];
    }
    return acc;
}

// Checkpoint: "MURRMDL1", version tag (u32 length + bytes), vocab, emb, hidden, out (u32),
// then Emb, W1, b1, W2, b2 as row-major f64.
inline constexpr std::string_view kModelMagic = "MURRMDL1";

[[nodiscard]] inline auto serialize_model(EncoderModel const& model) -> std::vector<std::uint8_t> {
    io::Writer w;
    w.magic(kModelMagic);
    w.str(model.version());
    auto const& d = model.dims();
    w.u32(d.vocab);
    w.u32(d.emb);
    w.u32(d.hidden);
    w.u32(d.out);
    w.f64s(model.params());
    return w.buffer();
}

inline void save_model(EncoderModel const& model, std::filesystem::path const& path) {
    io::Writer w;
    auto bytes = serialize_model(model);
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
}

[[nodiscard]] inline auto read_model(io::Reader& r) -> EncoderModel {
    r.expect_magic(kModelMagic);
    auto version = r.str();
    EncoderDims d;
    auto const dims_offset = r.offset();
    d.vocab = r.u32();
    d.emb = r.u32();
    d.hidden = r.u32();
    d.out = r.u32();
    if (d.vocab == 0 || d.emb == 0 || d.hidden == 0 || d.out == 0) {
        throw FormatError("zero encoder dimension", dims_offset);
    }
    if (r.remaining() != d.parameter_count() * sizeof(double)) {
        throw FormatError("parameter block size does not match the header dimensions", r.offset());
    }
    EncoderModel m(d, std::move(version));
    r.f64s(m.params());
    return m;
}

[[nodiscard]] inline auto load_model(std::filesystem::path const& path) -> EncoderModel {
    auto r = io::Reader::from_file(path);
    return read_model(r);
}

}  // namespace murr
