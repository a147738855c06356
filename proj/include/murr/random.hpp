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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace murr {

/// SplitMix64 finalizer; used to derive independent sub-seeds.
[[nodiscard]] constexpr auto mix64(std::uint64_t x) noexcept -> std::uint64_t {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

/// Derives a seed for a named purpose so that unrelated random streams never share state.
[[nodiscard]] constexpr auto derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0)
    -> std::uint64_t {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : purpose) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001B3ULL;
    }
    return mix64(mix64(seed ^ h) + index);
}

/// Random source with platform-independent derived distributions.
///
/// std::mt19937_64 has a fully specified output sequence; the standard
/// distributions do not, so the bounded, real and normal draws below are
/// implemented here to keep every generated artifact byte-identical
/// across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    auto next_u64() -> std::uint64_t { return m_engine(); }

    /// Uniform integer in [0, bound). bound must be positive.
    auto uniform_index(std::uint64_t bound) -> std::uint64_t {
        std::uint64_t const limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x = 0;
        do {
            x = m_engine();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform real in [0, 1) with 53 random bits.
    auto uniform01() -> double { return static_cast<double>(m_engine() >> 11U) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (no cached second value).
    auto normal() -> double {
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        double const u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Index drawn from an unnormalized non-negative weight vector with positive total.
    auto categorical(std::span<double const> weights) -> std::size_t {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        double const target = uniform01() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) {
                continue;
            }
            last_positive = i;
            acc += weights[i];
            if (target < acc) {
                return i;
            }
        }
        return last_positive;
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t const j = uniform_index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

    /// Simple random sample of min(k, n) distinct indices from [0, n), in draw order.
    auto sample_without_replacement(std::size_t n, std::size_t k) -> std::vector<std::size_t> {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) {
            pool[i] = i;
        }
        k = std::min(k, n);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t const j = i + uniform_index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

  private:
    std::mt19937_64 m_engine;
};

}  // namespace murr
