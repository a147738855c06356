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

#include <cmath>
#include <string>
#include <vector>

#include "murr/encoder.hpp"
#include "test_util.hpp"

using namespace murr;
using murr::testing::TempDir;

namespace {

// Straight-line re-implementation of the forward pass, used as an oracle.
auto naive_encode(EncoderModel const& m, std::vector<std::uint32_t> const& tokens) -> Vector {
    auto const& d = m.dims();
    Vector pooled(d.emb, 0.0);
    for (auto t : tokens) {
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            pooled[j] += m.emb()[t * d.emb + j] / static_cast<double>(tokens.size());
        }
    }
    Vector hidden(d.hidden);
    for (std::uint32_t i = 0; i < d.hidden; ++i) {
        double z = m.b1()[i];
        for (std::uint32_t j = 0; j < d.emb; ++j) {
            z += m.w1()[i * d.emb + j] * pooled[j];
        }
        hidden[i] = std::tanh(z);
    }
    Vector out(d.out);
    for (std::uint32_t i = 0; i < d.out; ++i) {
        double z = m.b2()[i];
        for (std::uint32_t j = 0; j < d.hidden; ++j) {
            z += m.w2()[i * d.hidden + j] * hidden[j];
        }
        out[i] = z;
    }
    return out;
}

auto with_random_biases(EncoderModel m, std::uint64_t seed) -> EncoderModel {
    Rng rng(seed);
    for (double& x : m.b1()) {
        x = 0.5 * rng.normal();
    }
    for (double& x : m.b2()) {
        x = 0.5 * rng.normal();
    }
    return m;
}

}  // namespace

TEST(Tokenize, CaseAndPunctuationNormalize) {
    auto a = tokenize("Hello, world", 4096);
    EXPECT_EQ(a.size(), 2U);
    EXPECT_EQ(a, tokenize("hello world", 4096));
    EXPECT_EQ(tokenize("HELLO--world!!", 4096), a);
}

TEST(Tokenize, EmptyAndSeparatorOnlyTextsGiveNoTokens) {
    EXPECT_TRUE(tokenize("", 4096).empty());
    EXPECT_TRUE(tokenize(" \t,.;!", 4096).empty());
}

TEST(Tokenize, IdsStayBelowVocab) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        std::string text;
        for (int c = 0; c < 40; ++c) {
            text.push_back(static_cast<char>(32 + rng.uniform_index(95)));
        }
        for (auto id : tokenize(text, 97)) {
            ASSERT_LT(id, 97U);
        }
    }
}

TEST(Tokenize, NonAsciiBytesStayInsideTokens) {
    auto ids = tokenize("caf\xC3\xA9 na\xC3\xAFve", 1U << 31U);
    ASSERT_EQ(ids.size(), 2U);
    EXPECT_EQ(ids[0], token_hash("caf\xC3\xA9") % (1U << 31U));
}

TEST(Tokenize, HashIsFnv1a64) {
    EXPECT_EQ(token_hash(""), 0xCBF29CE484222325ULL);
    EXPECT_EQ(token_hash("a"), 0xAF63DC4C8601EC8CULL);
    EXPECT_EQ(token_hash("foobar"), 0x85944171F73967E8ULL);
}

TEST(Encoder, DefaultOutputDimensionIs32) {
    auto m = EncoderModel::random_init({}, 1);
    EXPECT_EQ(encode(m, "some text").size(), 32U);
    EXPECT_EQ(m.params().size(), EncoderDims{}.parameter_count());
}

TEST(Encoder, EmptyTextEncodesBiasPath) {
    auto m = with_random_biases(EncoderModel::random_init(murr::testing::small_dims(), 2), 3);
    auto const& d = m.dims();
    auto v = encode(m, "");
    for (std::uint32_t i = 0; i < d.out; ++i) {
        double expected = m.b2()[i];
        for (std::uint32_t j = 0; j < d.hidden; ++j) {
            expected += m.w2()[i * d.hidden + j] * std::tanh(m.b1()[j]);
        }
        EXPECT_NEAR(v[i], expected, 1e-14);
    }
}

TEST(Encoder, MatchesNaiveForwardAndIsPure) {
    auto m = with_random_biases(EncoderModel::random_init(murr::testing::small_dims(), 4), 5);
    for (auto const* text : {"alpha beta", "alpha alpha gamma", "x"}) {
        auto v = encode(m, text);
        auto ref = naive_encode(m, tokenize(text, m.dims().vocab));
        ASSERT_EQ(v.size(), ref.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_NEAR(v[i], ref[i], 1e-13);
        }
        EXPECT_EQ(v, encode(m, text));
    }
}

TEST(Encoder, BackwardMatchesFiniteDifferences) {
    auto m = with_random_biases(EncoderModel::random_init(murr::testing::small_dims(), 6), 7);
    Vector upstream{0.3, -1.1, 0.7, 0.2};
    auto const tokens = tokenize("one two two three", m.dims().vocab);
    auto objective = [&](EncoderModel const& mm) {
        auto v = naive_encode(mm, tokens);
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += upstream[i] * v[i];
        }
        return s;
    };
    ForwardCache cache;
    forward_tokens(m, tokens, cache);
    std::vector<double> grad(m.params().size(), 0.0);
    backward(m, cache, upstream, grad);
    double const h = 1e-6;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        auto plus = m;
        auto minus = m;
        plus.params()[i] += h;
        minus.params()[i] -= h;
        double const fd = (objective(plus) - objective(minus)) / (2 * h);
        double const denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
        ASSERT_LT(std::abs(fd - grad[i]) / denom, 1e-5) << "parameter " << i;
    }
}

TEST(Similarity, DotProductExamples) {
    EXPECT_DOUBLE_EQ(similarity(Vector{1, 0, 0}, Vector{1, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(similarity(Vector{1, 2}, Vector{3, -1}), 1.0);
    EXPECT_THROW((void)similarity(Vector{1, 2}, Vector{1}), std::invalid_argument);
}

TEST(Encoder, RandomInitIsDeterministicWithExpectedScale) {
    auto a = EncoderModel::random_init({}, 9);
    auto b = EncoderModel::random_init({}, 9);
    EXPECT_TRUE(a.same_parameters(b));
    EXPECT_FALSE(a.same_parameters(EncoderModel::random_init({}, 10)));
    double s2 = 0.0;
    for (double x : a.emb()) {
        s2 += x * x;
    }
    EXPECT_NEAR(s2 / static_cast<double>(a.emb().size()), 1.0, 0.02);
    for (double x : a.b1()) {
        EXPECT_EQ(x, 0.0);
    }
    EXPECT_THROW(EncoderModel(EncoderDims{0, 1, 1, 1}), ConfigError);
}

TEST(Checkpoint, SaveLoadRoundTripIsExact) {
    auto m = with_random_biases(EncoderModel::random_init(murr::testing::small_dims(), 11, "s3-murr-cf"), 12);
    TempDir dir;
    save_model(m, dir / "m.bin");
    auto back = load_model(dir / "m.bin");
    EXPECT_TRUE(back.same_parameters(m));
    EXPECT_EQ(back.version(), "s3-murr-cf");
    EXPECT_EQ(back.dims(), m.dims());
    auto const size = std::filesystem::file_size(dir / "m.bin");
    EXPECT_EQ(size, 8U + 4U + 10U + 16U + m.params().size() * 8U);
}

TEST(Checkpoint, CorruptFilesAreRejectedWithOffsets) {
    auto m = EncoderModel::random_init(murr::testing::small_dims(), 1, "v");
    auto bytes = serialize_model(m);
    {
        auto bad = bytes;
        bad[0] = 'X';
        io::Reader r(bad);
        EXPECT_THROW((void)read_model(r), FormatError);
    }
    {
        auto truncated = bytes;
        truncated.resize(truncated.size() - 3);
        io::Reader r(truncated);
        EXPECT_THROW((void)read_model(r), FormatError);
    }
    {
        auto zero = bytes;
        // vocab field follows magic (8) + length (4) + "v" (1)
        std::fill(zero.begin() + 13, zero.begin() + 17, std::uint8_t{0});
        io::Reader r(zero);
        try {
            (void)read_model(r);
            FAIL();
        } catch (FormatError const& e) {
            EXPECT_EQ(e.offset(), 13U);
        }
    }
    EXPECT_ANY_THROW((void)load_model("/nonexistent/model.bin"));
}
