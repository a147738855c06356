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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "murr/error.hpp"

namespace murr::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Append-only little-endian byte buffer.
class Writer {
  public:
    void bytes(void const* data, std::size_t size) {
        auto const* p = static_cast<std::uint8_t const*>(data);
        m_buffer.insert(m_buffer.end(), p, p + size);
    }
    void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void f64s(std::span<double const> v) { bytes(v.data(), v.size() * sizeof(double)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    [[nodiscard]] auto buffer() const noexcept -> std::vector<std::uint8_t> const& { return m_buffer; }

    void save(std::filesystem::path const& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open for writing: " + path.string());
        }
        out.write(reinterpret_cast<char const*>(m_buffer.data()), static_cast<std::streamsize>(m_buffer.size()));
        if (!out) {
            throw std::runtime_error("write failed: " + path.string());
        }
    }

  private:
    std::vector<std::uint8_t> m_buffer;
};

/// Bounds-checked little-endian reader; every failure reports its byte offset.
class Reader {
  public:
    explicit Reader(std::vector<std::uint8_t> data) : m_data(std::move(data)) {}

    static auto from_file(std::filesystem::path const& path) -> Reader {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw std::runtime_error("cannot open for reading: " + path.string());
        }
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return Reader(std::move(data));
    }

    void expect_magic(std::string_view tag) {
        need(tag.size(), "magic");
        if (std::memcmp(m_data.data() + m_pos, tag.data(), tag.size()) != 0) {
            throw FormatError("bad magic, expected " + std::string(tag), m_pos);
        }
        m_pos += tag.size();
    }
    auto u8() -> std::uint8_t { return scalar<std::uint8_t>("u8"); }
    auto u32() -> std::uint32_t { return scalar<std::uint32_t>("u32"); }
    auto u64() -> std::uint64_t { return scalar<std::uint64_t>("u64"); }
    auto f64() -> double { return scalar<double>("f64"); }
    void f64s(std::span<double> out) {
        need(out.size() * sizeof(double), "f64 array");
        std::memcpy(out.data(), m_data.data() + m_pos, out.size() * sizeof(double));
        m_pos += out.size() * sizeof(double);
    }
    auto raw(std::size_t size) -> std::span<std::uint8_t const> {
        need(size, "byte block");
        auto out = std::span<std::uint8_t const>(m_data.data() + m_pos, size);
        m_pos += size;
        return out;
    }
    auto str() -> std::string {
        auto const len = u32();
        auto block = raw(len);
        return {reinterpret_cast<char const*>(block.data()), block.size()};
    }

    [[nodiscard]] auto offset() const noexcept -> std::uint64_t { return m_pos; }
    [[nodiscard]] auto remaining() const noexcept -> std::size_t { return m_data.size() - m_pos; }
    [[nodiscard]] auto at_end() const noexcept -> bool { return m_pos == m_data.size(); }

    void expect_end() const {
        if (!at_end()) {
            throw FormatError("trailing bytes", m_pos);
        }
    }

  private:
    void need(std::size_t size, char const* what) const {
        if (m_data.size() - m_pos < size) {
            throw FormatError(std::string("truncated file while reading ") + what, m_pos);
        }
    }
    template <typename T>
    auto scalar(char const* what) -> T {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, m_data.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return v;
    }

    std::vector<std::uint8_t> m_data;
    std::size_t m_pos = 0;
};

}  // namespace murr::io
