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
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "murr/error.hpp"
#include "murr/vindex.hpp"

namespace murr {

/// 1 iff one of the first k entries is relevant.
[[nodiscard]] inline auto success_at_k(RankedList const& ranked, std::set<std::string> const& relevant,
                                       std::size_t k) -> int {
    std::size_t const depth = std::min(k, ranked.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (relevant.count(ranked[i].doc_id) != 0) {
            return 1;
        }
    }
    return 0;
}

[[nodiscard]] inline auto success_at_5(RankedList const& ranked, std::set<std::string> const& relevant) -> int {
    return success_at_k(ranked, relevant, 5);
}

/// Success@5 of query set i (queries first seen in session i) evaluated at session s.
struct EvalCell {
    std::size_t query_set = 0;
    std::size_t session = 0;
    std::vector<std::string> query_ids;
    std::vector<std::uint8_t> values;
    double mean = 0.0;

    /// Recomputes the mean; an empty set has mean 0.
    void finalize() {
        if (query_set > session) {
            throw std::logic_error("EvalCell: query set introduced after the evaluated session");
        }
        double total = 0.0;
        for (auto v : values) {
            total += v;
        }
        mean = values.empty() ? 0.0 : total / static_cast<double>(values.size());
    }
};

/// Unweighted mean of per-query-set means.
[[nodiscard]] inline auto macro_average(std::span<double const> means) -> double {
    if (means.empty()) {
        throw std::invalid_argument("macro_average: no cells");
    }
    double total = 0.0;
    for (double m : means) {
        total += m;
    }
    return total / static_cast<double>(means.size());
}

[[nodiscard]] inline auto mean_of(std::span<double const> xs) -> double {
    double total = 0.0;
    for (double x : xs) {
        total += x;
    }
    return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
[[nodiscard]] inline auto sample_std(std::span<double const> xs) -> double {
    if (xs.size() < 2) {
        return 0.0;
    }
    double const m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

[[nodiscard]] inline auto median_of(std::vector<double> xs) -> double {
    if (xs.empty()) {
        throw std::invalid_argument("median_of: empty input");
    }
    std::sort(xs.begin(), xs.end());
    std::size_t const n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// grid[i][s] = Success@5 of query set i with indexes 0..s, meaningful for s >= i.
using SuccessGrid = std::vector<std::vector<double>>;

struct GainTerm {
    std::size_t query_set = 0;
    std::size_t session = 0;
    double value = 0.0;
};

struct RelativeGain {
    double mean = 0.0;
    double std = 0.0;
    std::vector<GainTerm> terms;
    /// Pairs whose previous-session Success@5 was zero.
    std::size_t excluded = 0;
};

/// Average over pairs 0 <= i < s <= S-1 of grid[i][s] / grid[i][s-1] - 1, with the sample std.
[[nodiscard]] inline auto relative_gain(SuccessGrid const& grid) -> RelativeGain {
    std::size_t const n_sessions = grid.size();
    if (n_sessions < 2) {
        throw std::invalid_argument("relative_gain: need at least two sessions");
    }
    for (std::size_t i = 0; i < n_sessions; ++i) {
        if (grid[i].size() != n_sessions) {
            throw std::invalid_argument("relative_gain: grid must be S x S");
        }
    }
    RelativeGain out;
    std::vector<double> values;
    for (std::size_t s = 1; s < n_sessions; ++s) {
        for (std::size_t i = 0; i < s; ++i) {
            double const prev = grid[i][s - 1];
            if (prev == 0.0) {
                ++out.excluded;
                continue;
            }
            double const v = grid[i][s] / prev - 1.0;
            out.terms.push_back(GainTerm{i, s, v});
            values.push_back(v);
        }
    }
    if (values.empty()) {
        throw UndefinedMetricError("relative_gain: every term has a zero denominator");
    }
    out.mean = mean_of(values);
    out.std = sample_std(values);
    return out;
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
[[nodiscard]] inline auto regularized_incomplete_beta(double x, double a, double b) -> double {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("regularized_incomplete_beta: a and b must be positive");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    auto continued_fraction = [](double x, double a, double b) {
        constexpr int kMaxIterations = 10000;
        constexpr double kEps = 1e-16;
        constexpr double kTiny = 1e-300;
        double const qab = a + b;
        double const qap = a + 1.0;
        double const qam = a - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * x / qap;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= kMaxIterations; ++m) {
            double const m2 = 2.0 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < kTiny) {
                d = kTiny;
            }
            c = 1.0 + aa / c;
            if (std::abs(c) < kTiny) {
                c = kTiny;
            }
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < kTiny) {
                d = kTiny;
            }
            c = 1.0 + aa / c;
            if (std::abs(c) < kTiny) {
                c = kTiny;
            }
            d = 1.0 / d;
            double const delta = d * c;
            h *= delta;
            if (std::abs(delta - 1.0) < kEps) {
                break;
            }
        }
        return h;
    };
    double const log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double const front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * continued_fraction(x, a, b) / a;
    }
    return 1.0 - front * continued_fraction(1.0 - x, b, a) / b;
}

/// Two-sided p-value of Student's t with df degrees of freedom.
[[nodiscard]] inline auto student_t_two_sided_p(double t, double df) -> double {
    if (std::isinf(t)) {
        return 0.0;
    }
    return regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;

    [[nodiscard]] auto significant(double level = 0.05) const noexcept -> bool { return p < level; }
};

/// Paired t-test on a - b.
[[nodiscard]] inline auto paired_t_test(std::span<double const> a, std::span<double const> b) -> TTestResult {
    if (a.size() != b.size()) {
        throw std::invalid_argument("paired_t_test: samples differ in length");
    }
    if (a.size() < 2) {
        throw std::invalid_argument("paired_t_test: need at least two pairs");
    }
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    TTestResult out;
    out.df = d.size() - 1;
    double const m = mean_of(d);
    double const sd = sample_std(d);
    if (sd == 0.0) {
        if (m == 0.0) {
            return out;
        }
        out.t = m > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        out.p = 0.0;
        return out;
    }
    out.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
    out.p = student_t_two_sided_p(out.t, static_cast<double>(out.df));
    return out;
}

}  // namespace murr
