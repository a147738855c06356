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

#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace murr {

/// Invalid user-supplied configuration (synthetic spec, scenario, train config).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text file. Carries the 1-based line number.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::string const& file, std::size_t line, std::string const& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), m_line(line) {}

    [[nodiscard]] auto line() const noexcept -> std::size_t { return m_line; }

  private:
    std::size_t m_line;
};

/// Well-formed input that violates a data-model invariant (dangling id, duplicate id, ...).
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Corrupt or truncated binary file. Carries the byte offset where decoding failed.
class FormatError : public std::runtime_error {
  public:
    FormatError(std::string const& what, std::uint64_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), m_offset(offset) {}

    [[nodiscard]] auto offset() const noexcept -> std::uint64_t { return m_offset; }

  private:
    std::uint64_t m_offset;
};

/// Numerical failure during training (non-finite gradient).
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Metric undefined for the given input (e.g. every relative-gain term excluded).
class UndefinedMetricError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(std::string const&)>;

namespace detail {
    struct WarningState {
        std::mutex mutex;
        WarningSink sink = [](std::string const& msg) { std::cerr << "[murr] warning: " << msg << '\n'; };
    };

    inline auto warning_state() -> WarningState& {
        static WarningState state;
        return state;
    }
}  // namespace detail

/// Replaces the process-wide warning sink; returns the previous one.
inline auto set_warning_sink(WarningSink sink) -> WarningSink {
    auto& state = detail::warning_state();
    std::lock_guard lock(state.mutex);
    std::swap(state.sink, sink);
    return sink;
}

inline void warn(std::string const& message) {
    auto& state = detail::warning_state();
    std::lock_guard lock(state.mutex);
    if (state.sink) {
        state.sink(message);
    }
}

}  // namespace murr
