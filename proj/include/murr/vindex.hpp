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
#include <future>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "murr/binary_io.hpp"
#include "murr/corpus.hpp"
#include "murr/encoder.hpp"
#include "murr/error.hpp"
#include "murr/random.hpp"

namespace murr {

class IndexShard;
inline auto read_shard(io::Reader& r) -> IndexShard;

struct Hit {
    std::string doc_id;
    double score = 0.0;

    auto operator==(Hit const&) const -> bool = default;
};

/// Descending score, ties by ascending doc id.
[[nodiscard]] inline auto ranks_before(Hit const& a, Hit const& b) -> bool {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.doc_id < b.doc_id;
}

using RankedList = std::vector<Hit>;

enum class IndexMode : std::uint8_t { Flat = 0, PQ = 1 };

inline constexpr std::size_t kPqCentroids = 16;  // 4-bit codes
inline constexpr std::size_t kKMeansMaxIterations = 25;

/// Lloyd's k-means on row-major points with seeded k-means++ seeding.
///
/// Centroids are running means, so a cluster of identical points keeps that point's exact
/// value. An empty cluster takes the member farthest from its centroid in the largest cluster
/// that still has spread; with no such cluster it is left as is.
[[nodiscard]] inline auto kmeans(std::span<double const> points, std::size_t dim, std::size_t k,
                                 std::size_t max_iterations, std::uint64_t seed) -> std::vector<double> {
    std::size_t const n = points.size() / dim;
    if (n == 0 || k == 0) {
        throw std::invalid_argument("kmeans: need at least one point and one centroid");
    }
    auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };
    auto sqdist = [dim](std::span<double const> a, std::span<double const> b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            double const d = a[j] - b[j];
            acc += d * d;
        }
        return acc;
    };

    Rng rng(seed);
    std::vector<double> centroids(k * dim);
    auto centroid = [&](std::size_t c) { return std::span<double>(centroids).subspan(c * dim, dim); };
    {
        std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
        std::size_t pick = rng.uniform_index(n);
        for (std::size_t c = 0; c < k; ++c) {
            if (c > 0) {
                double total = 0.0;
                for (double w : nearest) {
                    total += w;
                }
                pick = total > 0.0 ? rng.categorical(nearest) : rng.uniform_index(n);
            }
            std::copy_n(point(pick).begin(), dim, centroid(c).begin());
            for (std::size_t i = 0; i < n; ++i) {
                nearest[i] = std::min(nearest[i], sqdist(point(i), centroid(c)));
            }
        }
    }

    std::vector<std::size_t> assign(n, k);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double const d = sqdist(point(i), centroid(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) {
            break;
        }
        std::fill(counts.begin(), counts.end(), 0);
        std::fill(centroids.begin(), centroids.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = centroid(assign[i]);
            double const cnt = static_cast<double>(++counts[assign[i]]);
            auto p = point(i);
            for (std::size_t j = 0; j < dim; ++j) {
                c[j] += (p[j] - c[j]) / cnt;
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                continue;
            }
            // Split: farthest member of the largest cluster with non-zero spread.
            std::size_t donor = k;
            std::size_t far_point = n;
            double far_d = 0.0;
            for (std::size_t cand = 0; cand < k; ++cand) {
                if (counts[cand] < 2 || (donor < k && counts[cand] <= counts[donor])) {
                    continue;
                }
                std::size_t cand_point = n;
                double cand_d = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (assign[i] != cand) {
                        continue;
                    }
                    double const d = sqdist(point(i), centroid(cand));
                    if (d > cand_d) {
                        cand_d = d;
                        cand_point = i;
                    }
                }
                if (cand_point < n) {
                    donor = cand;
                    far_point = cand_point;
                    far_d = cand_d;
                }
            }
            if (donor == k || !(far_d > 0.0)) {
                continue;
            }
            std::copy_n(point(far_point).begin(), dim, centroid(c).begin());
            --counts[donor];
            counts[c] = 1;
            assign[far_point] = c;
            changed = true;
        }
    }
    return centroids;
}

/// Immutable per-session vector index built by one encoder version.
class IndexShard {
  public:
    IndexShard() = default;

    /// Builds from precomputed row-major vectors. PQ needs at least 16 vectors and falls back
    /// to flat storage (with a warning) otherwise.
    static auto from_vectors(std::vector<std::string> doc_ids, std::vector<double> vectors, std::uint32_t dim,
                             IndexMode mode, std::uint32_t pq_m, std::uint64_t seed, std::uint32_t session,
                             std::string version) -> IndexShard {
        if (dim == 0 || vectors.size() != doc_ids.size() * dim) {
            throw std::invalid_argument("IndexShard: vector block does not match doc ids x dim");
        }
        IndexShard shard;
        shard.m_session = session;
        shard.m_version = std::move(version);
        shard.m_dim = dim;
        shard.m_doc_ids = std::move(doc_ids);
        if (mode == IndexMode::PQ && shard.m_doc_ids.size() < kPqCentroids) {
            warn("PQ shard with " + std::to_string(shard.m_doc_ids.size()) +
                 " vectors (< 16) falls back to flat storage");
            mode = IndexMode::Flat;
        }
        shard.m_mode = mode;
        if (mode == IndexMode::Flat) {
            shard.m_vectors = std::move(vectors);
            return shard;
        }
        if (pq_m == 0 || dim % pq_m != 0) {
            throw ConfigError("pq_m must be positive and divide d_out (" + std::to_string(dim) + ")");
        }
        std::size_t const n = shard.m_doc_ids.size();
        std::size_t const dsub = dim / pq_m;
        shard.m_pq_m = pq_m;
        shard.m_codebooks.resize(std::size_t{pq_m} * kPqCentroids * dsub);
        shard.m_codes.assign((n * pq_m + 1) / 2, 0);
        std::vector<double> sub(n * dsub);
        for (std::uint32_t m = 0; m < pq_m; ++m) {
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(i * dim + m * dsub), dsub,
                            sub.begin() + static_cast<std::ptrdiff_t>(i * dsub));
            }
            auto book = kmeans(sub, dsub, kPqCentroids, kKMeansMaxIterations, derive_seed(seed, "pq-kmeans", m));
            std::copy(book.begin(), book.end(),
                      shard.m_codebooks.begin() + static_cast<std::ptrdiff_t>(m * kPqCentroids * dsub));
            for (std::size_t i = 0; i < n; ++i) {
                std::uint8_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < kPqCentroids; ++c) {
                    double d = 0.0;
                    for (std::size_t j = 0; j < dsub; ++j) {
                        double const diff = sub[i * dsub + j] - book[c * dsub + j];
                        d += diff * diff;
                    }
                    if (d < best_d) {
                        best_d = d;
                        best = static_cast<std::uint8_t>(c);
                    }
                }
                shard.set_code(i, m, best);
            }
        }
        return shard;
    }

    [[nodiscard]] auto session() const noexcept -> std::uint32_t { return m_session; }
    [[nodiscard]] auto version() const noexcept -> std::string const& { return m_version; }
    [[nodiscard]] auto mode() const noexcept -> IndexMode { return m_mode; }
    [[nodiscard]] auto dim() const noexcept -> std::uint32_t { return m_dim; }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return m_doc_ids.size(); }
    [[nodiscard]] auto doc_ids() const noexcept -> std::vector<std::string> const& { return m_doc_ids; }
    [[nodiscard]] auto vectors() const noexcept -> std::span<double const> { return m_vectors; }
    [[nodiscard]] auto pq_m() const noexcept -> std::uint32_t { return m_pq_m; }
    [[nodiscard]] auto codebooks() const noexcept -> std::span<double const> { return m_codebooks; }
    [[nodiscard]] auto packed_codes() const noexcept -> std::span<std::uint8_t const> { return m_codes; }

    [[nodiscard]] auto code(std::size_t i, std::size_t m) const -> std::uint8_t {
        std::size_t const idx = i * m_pq_m + m;
        std::uint8_t const byte = m_codes[idx / 2];
        return (idx % 2 == 0) ? (byte & 0x0FU) : static_cast<std::uint8_t>(byte >> 4U);
    }

    /// Approximate (PQ) or exact (flat) score of every stored vector against q.
    [[nodiscard]] auto scores(std::span<double const> q) const -> std::vector<double> {
        if (q.size() != m_dim) {
            throw std::invalid_argument("search: query dimension " + std::to_string(q.size()) +
                                        " does not match shard dimension " + std::to_string(m_dim));
        }
        std::size_t const n = size();
        std::vector<double> out(n);
        if (m_mode == IndexMode::Flat) {
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = similarity(q, m_vectors_span(i));
            }
            return out;
        }
        std::size_t const dsub = m_dim / m_pq_m;
        std::vector<double> table(std::size_t{m_pq_m} * kPqCentroids);
        for (std::size_t m = 0; m < m_pq_m; ++m) {
            auto const qs = q.subspan(m * dsub, dsub);
            for (std::size_t c = 0; c < kPqCentroids; ++c) {
                auto const cent = std::span<double const>(m_codebooks).subspan((m * kPqCentroids + c) * dsub, dsub);
                table[m * kPqCentroids + c] = similarity(qs, cent);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t m = 0; m < m_pq_m; ++m) {
                acc += table[m * kPqCentroids + code(i, m)];
            }
            out[i] = acc;
        }
        return out;
    }

  private:
    friend auto read_shard(io::Reader& r) -> IndexShard;

    [[nodiscard]] auto m_vectors_span(std::size_t i) const -> std::span<double const> {
        return std::span<double const>(m_vectors).subspan(i * m_dim, m_dim);
    }
    void set_code(std::size_t i, std::size_t m, std::uint8_t c) {
        std::size_t const idx = i * m_pq_m + m;
        auto& byte = m_codes[idx / 2];
        byte = (idx % 2 == 0) ? static_cast<std::uint8_t>((byte & 0xF0U) | c)
                              : static_cast<std::uint8_t>((byte & 0x0FU) | (c << 4U));
    }

    std::uint32_t m_session = 0;
    std::string m_version;
    IndexMode m_mode = IndexMode::Flat;
    std::uint32_t m_dim = 0;
    std::vector<std::string> m_doc_ids;
    std::vector<double> m_vectors;
    std::uint32_t m_pq_m = 0;
    std::vector<double> m_codebooks;
    std::vector<std::uint8_t> m_codes;
};

/// Encodes every document with the session model and indexes the vectors.
[[nodiscard]] inline auto build_shard(EncoderModel const& model, std::span<Document const* const> docs,
                                      IndexMode mode, std::uint32_t pq_m, std::uint64_t seed, std::uint32_t session)
    -> IndexShard {
    std::uint32_t const dim = model.dims().out;
    std::vector<std::string> ids;
    std::vector<double> vectors;
    ids.reserve(docs.size());
    vectors.reserve(docs.size() * dim);
    for (auto const* d : docs) {
        ids.push_back(d->id);
        auto v = encode(model, d->text);
        vectors.insert(vectors.end(), v.begin(), v.end());
    }
    return IndexShard::from_vectors(std::move(ids), std::move(vectors), dim, mode, pq_m, seed, session,
                                    model.version());
}

/// Top-k of one shard: full scan, ordered by (score desc, doc id asc).
[[nodiscard]] inline auto search_shard(IndexShard const& shard, std::span<double const> qvec, std::int64_t k)
    -> RankedList {
    if (k <= 0) {
        return {};
    }
    auto const scores = shard.scores(qvec);
    auto const& ids = shard.doc_ids();
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    auto const keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return ids[a] < ids[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), before);
    RankedList out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.push_back(Hit{ids[order[i]], scores[order[i]]});
    }
    return out;
}

/// Merges per-shard ranked lists by raw score and truncates to k.
[[nodiscard]] inline auto merge_ranked(std::vector<RankedList> lists, std::int64_t k) -> RankedList {
    if (k <= 0) {
        return {};
    }
    RankedList all;
    for (auto& l : lists) {
        all.insert(all.end(), std::make_move_iterator(l.begin()), std::make_move_iterator(l.end()));
    }
    auto const keep = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
    all.resize(keep);
    return all;
}

/// Searches every shard with the same query vector (per-shard depth k) and merges.
/// With threads > 1 the shards are searched concurrently; the merged list is identical either way.
[[nodiscard]] inline auto search_all(std::span<IndexShard const* const> shards, std::span<double const> qvec,
                                     std::int64_t k, std::size_t threads = 1) -> RankedList {
    if (shards.empty() || k <= 0) {
        return {};
    }
    for (auto const* s : shards) {
        if (s->dim() != shards.front()->dim()) {
            throw std::invalid_argument("search_all: shards disagree on d_out");
        }
    }
    std::vector<RankedList> lists(shards.size());
    if (threads <= 1 || shards.size() == 1) {
        for (std::size_t i = 0; i < shards.size(); ++i) {
            lists[i] = search_shard(*shards[i], qvec, k);
        }
    } else {
        std::vector<std::future<RankedList>> pending;
        for (auto const* s : shards) {
            pending.push_back(std::async(std::launch::async, [s, qvec, k] { return search_shard(*s, qvec, k); }));
        }
        for (std::size_t i = 0; i < pending.size(); ++i) {
            lists[i] = pending[i].get();
        }
    }
    return merge_ranked(std::move(lists), k);
}

[[nodiscard]] inline auto search_all(std::span<IndexShard const> shards, std::span<double const> qvec, std::int64_t k,
                                     std::size_t threads = 1) -> RankedList {
    std::vector<IndexShard const*> ptrs;
    for (auto const& s : shards) {
        ptrs.push_back(&s);
    }
    return search_all(std::span<IndexShard const* const>(ptrs), qvec, k, threads);
}

// Shard file: "MURRIDX1", format version (u32), mode (u8: 0 flat, 1 pq), d_out (u32), n (u64),
// encoder version tag (u32 length + bytes), session id (u32), then
//   flat: n x d_out f64 row-major
//   pq:   m (u32), m x 16 x (d_out/m) f64 codebooks, ceil(n*m/2) bytes of 4-bit codes
//         (code of vector i, subspace j at nibble i*m+j, low nibble first)
// then the doc-id table: count (u32), per id u32 length + UTF-8 bytes.
inline constexpr std::string_view kShardMagic = "MURRIDX1";
inline constexpr std::uint32_t kShardFormatVersion = 1;

[[nodiscard]] inline auto serialize_shard(IndexShard const& shard) -> std::vector<std::uint8_t> {
    io::Writer w;
    w.magic(kShardMagic);
    w.u32(kShardFormatVersion);
    w.u8(static_cast<std::uint8_t>(shard.mode()));
    w.u32(shard.dim());
    w.u64(shard.size());
    w.str(shard.version());
    w.u32(shard.session());
    if (shard.mode() == IndexMode::Flat) {
        w.f64s(shard.vectors());
    } else {
        w.u32(shard.pq_m());
        w.f64s(shard.codebooks());
        w.bytes(shard.packed_codes().data(), shard.packed_codes().size());
    }
    w.u32(static_cast<std::uint32_t>(shard.size()));
    for (auto const& id : shard.doc_ids()) {
        w.str(id);
    }
    return w.buffer();
}

inline void save_shard(IndexShard const& shard, std::filesystem::path const& path) {
    io::Writer w;
    auto bytes = serialize_shard(shard);
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
}

[[nodiscard]] inline auto read_shard(io::Reader& r) -> IndexShard {
    r.expect_magic(kShardMagic);
    auto const version_offset = r.offset();
    if (r.u32() != kShardFormatVersion) {
        throw FormatError("unsupported shard format version", version_offset);
    }
    auto const mode_offset = r.offset();
    auto const mode = r.u8();
    if (mode > 1) {
        throw FormatError("unknown shard mode", mode_offset);
    }
    IndexShard s;
    s.m_mode = static_cast<IndexMode>(mode);
    auto const dim_offset = r.offset();
    s.m_dim = r.u32();
    if (s.m_dim == 0) {
        throw FormatError("zero d_out", dim_offset);
    }
    auto const n = r.u64();
    s.m_version = r.str();
    s.m_session = r.u32();
    if (s.m_mode == IndexMode::Flat) {
        if (n > r.remaining() / (std::size_t{s.m_dim} * sizeof(double))) {
            throw FormatError("vector block larger than the file", r.offset());
        }
        s.m_vectors.resize(n * s.m_dim);
        r.f64s(s.m_vectors);
    } else {
        auto const m_offset = r.offset();
        s.m_pq_m = r.u32();
        if (s.m_pq_m == 0 || s.m_dim % s.m_pq_m != 0) {
            throw FormatError("pq_m does not divide d_out", m_offset);
        }
        s.m_codebooks.resize(std::size_t{s.m_pq_m} * kPqCentroids * (s.m_dim / s.m_pq_m));
        r.f64s(s.m_codebooks);
        if (n > r.remaining() * 2) {
            throw FormatError("code block larger than the file", r.offset());
        }
        auto codes = r.raw((n * s.m_pq_m + 1) / 2);
        s.m_codes.assign(codes.begin(), codes.end());
    }
    auto const count_offset = r.offset();
    auto const count = r.u32();
    if (count != n) {
        throw FormatError("doc-id table size does not match the header", count_offset);
    }
    s.m_doc_ids.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        s.m_doc_ids.push_back(r.str());
    }
    r.expect_end();
    return s;
}

[[nodiscard]] inline auto load_shard(std::filesystem::path const& path) -> IndexShard {
    auto r = io::Reader::from_file(path);
    return read_shard(r);
}

}  // namespace murr
