// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "erase/attention.hpp"
#include "erase/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace erase;
namespace fs = std::filesystem;

using support::scratch_dir;

TEST_CASE("softmax rows sum to one and match the oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = oracle::random_attention(rng, 1 + rng.below(4), 1 + rng.below(16), 1 + rng.below(6),
                                                 1 + rng.below(40), trial % 3 == 0 ? 50.0 : 1.0);
        const auto probs = attention_probabilities(in);
        REQUIRE(probs.size() == in.num_heads * in.text_tokens * in.vision_tokens);
        for (std::size_t row = 0; row < in.num_heads * in.text_tokens; ++row) {
            double sum = 0.0;
            for (std::size_t v = 0; v < in.vision_tokens; ++v) {
                const double p = probs[row * in.vision_tokens + v];
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
        const auto scores = attention_scores(in);
        const auto expect = oracle::attention_scores(in);
        REQUIRE(scores.values.size() == expect.size());
        double total = 0.0;
        for (std::size_t v = 0; v < expect.size(); ++v) {
            CHECK(std::abs(scores.values[v] - expect[v]) < 1e-9);
            total += scores.values[v];
        }
        CHECK(std::abs(total - static_cast<double>(in.text_tokens)) < 1e-9);
    }
}

TEST_CASE("softmax survives huge logits") {
    Rng rng(42);
    const auto in = oracle::random_attention(rng, 2, 8, 3, 10, 1e4);
    const auto s = attention_scores(in);
    for (const double v : s.values) {
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("precomputed scores bypass the matrices") {
    AttentionInput in;
    in.vision_tokens = 3;
    in.precomputed_scores = std::vector<double>{0.2, 0.5, 0.3};
    CHECK(attention_scores(in).values == std::vector<double>{0.2, 0.5, 0.3});
    in.precomputed_scores = std::vector<double>{0.2, 0.5};
    CHECK_THROWS_AS(attention_scores(in), InvalidInput);
}

TEST_CASE("malformed attention operands are rejected") {
    Rng rng(43);
    auto in = oracle::random_attention(rng, 2, 4, 2, 5);
    in.vision_keys.pop_back();
    CHECK_THROWS_AS(attention_scores(in), InvalidInput);
    in = oracle::random_attention(rng, 2, 4, 2, 5);
    in.text_queries[3] = std::nan("");
    CHECK_THROWS_AS(attention_scores(in), InvalidInput);
    in = oracle::random_attention(rng, 2, 4, 0, 5);
    CHECK_THROWS_AS(attention_scores(in), InvalidInput);
}

TEST_CASE("synthetic provider is deterministic and keyed by patch index") {
    SyntheticAttentionConfig cfg;
    cfg.seed = 99;
    SyntheticAttentionProvider a(cfg), b(cfg);
    const std::vector<std::size_t> all = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<std::size_t> some = {2, 5, 9};
    const auto fa = a.fetch(17, all, 10);
    const auto fb = b.fetch(17, all, 10);
    CHECK(fa.vision_keys == fb.vision_keys);
    CHECK(fa.text_queries == fb.text_queries);
    CHECK(a.calls() == 1);

    const auto sub = a.fetch(17, some, 10);
    CHECK(sub.text_queries == fa.text_queries);
    const std::size_t d = cfg.head_dim;
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
        for (std::size_t j = 0; j < some.size(); ++j) {
            for (std::size_t t = 0; t < d; ++t) {
                CHECK(sub.vision_keys[(h * some.size() + j) * d + t] == fa.vision_keys[(h * 10 + some[j]) * d + t]);
            }
        }
    }
    CHECK(a.fetch(2, all, 10).vision_keys != fa.vision_keys);
    CHECK(a.full_layer(17, 10).vision_keys == fa.vision_keys);
    CHECK_THROWS_AS(a.fetch(17, std::vector<std::size_t>{10}, 10), ProviderError);
}

TEST_CASE("relevance pulls keys toward the query topic") {
    SyntheticAttentionConfig cfg;
    cfg.seed = 5;
    cfg.relevance.assign(200, 0.0);
    for (std::size_t i = 0; i < 200; i += 10) {
        cfg.relevance[i] = 1.0;
    }
    SyntheticAttentionProvider p(cfg);
    const auto scores = attention_scores(p.full_layer(17, 200)).values;
    double rel = 0.0, other = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        (cfg.relevance[i] > 0 ? rel : other) += scores[i];
    }
    CHECK(rel / 20.0 > 3.0 * other / 180.0);

    cfg.relevance.resize(10);
    SyntheticAttentionProvider short_rel(cfg);
    CHECK_THROWS_AS(short_rel.full_layer(17, 200), ProviderError);
}

TEST_CASE("attention dump round trip through the file-backed provider") {
    const auto dir = scratch_dir("dump");
    Rng rng(44);
    AttentionDumpManifest m;
    m.model_id = "qwen2.5-vl-7b";
    m.num_layers = 28;
    m.hidden_dim = 3584;
    m.num_heads = 2;
    m.head_dim = 8;
    m.num_text_tokens = 3;
    m.num_vision_tokens = 12;
    m.vision_token_patch_indices.resize(12);
    std::iota(m.vision_token_patch_indices.begin(), m.vision_token_patch_indices.end(), std::size_t{0});
    for (std::size_t i = 12; i > 1; --i) {
        std::swap(m.vision_token_patch_indices[i - 1], m.vision_token_patch_indices[rng.below(i)]);
    }
    m.layers = {{2, "q_2.bin", "k_2.bin"}, {17, "q_17.bin", "k_17.bin"}};
    std::vector<std::vector<float>> qs, ks;
    for (std::size_t l = 0; l < 2; ++l) {
        qs.emplace_back(2 * 3 * 8);
        ks.emplace_back(2 * 12 * 8);
        for (auto& v : qs.back()) {
            v = static_cast<float>(rng.uniform(-1, 1));
        }
        for (auto& v : ks.back()) {
            v = static_cast<float>(rng.uniform(-1, 1));
        }
    }
    write_attention_dump(dir, m, qs, ks);
    CHECK(check_attention_dump(dir).empty());

    FileAttentionProvider provider(dir);
    const std::vector<std::size_t> patches = {0, 3, 4, 11};
    const auto in = provider.fetch(17, patches, 12);
    CHECK(in.vision_tokens == 4);
    for (std::size_t i = 0; i < qs[1].size(); ++i) {
        CHECK(in.text_queries[i] == static_cast<double>(qs[1][i]));
    }
    for (std::size_t j = 0; j < patches.size(); ++j) {
        const auto token = static_cast<std::size_t>(
            std::find(m.vision_token_patch_indices.begin(), m.vision_token_patch_indices.end(), patches[j]) -
            m.vision_token_patch_indices.begin());
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t t = 0; t < 8; ++t) {
                CHECK(in.vision_keys[(h * 4 + j) * 8 + t] == static_cast<double>(ks[1][(h * 12 + token) * 8 + t]));
            }
        }
    }
    CHECK_THROWS_AS(provider.fetch(5, patches, 12), ProviderError);
    CHECK_THROWS_AS(provider.fetch(17, patches, 13), ProviderError);

    // Truncated key file and a broken permutation are both reported.
    fs::resize_file(dir / "k_17.bin", 10);
    CHECK_FALSE(check_attention_dump(dir).empty());
    CHECK_THROWS_AS(FileAttentionProvider{dir}, ProviderError);
    write_attention_dump(dir, m, qs, ks);
    auto broken = m;
    broken.vision_token_patch_indices[0] = broken.vision_token_patch_indices[1];
    write_attention_dump(dir, broken, qs, ks);
    CHECK_FALSE(check_attention_dump(dir).empty());
    CHECK_THROWS_AS(FileAttentionProvider{scratch_dir("empty")}, ProviderError);
    fs::remove_all(dir);
}
