// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace erase {

/// Text queries and vision keys of one decoder layer, per-head layout
/// [head][row][dim]. A single-head input (num_heads = 1) carries the full
/// model width as head_dim.
struct AttentionInput {
    int layer = 0;
    std::size_t num_heads = 1;
    std::size_t head_dim = 0;
    std::size_t text_tokens = 0;    ///< L
    std::size_t vision_tokens = 0;  ///< M_s1
    std::vector<double> text_queries;
    std::vector<double> vision_keys;
    /// When present, used as the relevance scores and the matrices are ignored.
    std::optional<std::vector<double>> precomputed_scores;
};

/// Aggregated text-to-vision relevance, one value per stage-1 token.
struct RelevanceScores {
    std::vector<double> values;
    int layer = 0;
};

/// Row-stochastic attention, layout [head][text row][vision token]: per head,
/// softmax over the vision tokens of q.k / sqrt(head_dim).
std::vector<double> attention_probabilities(const AttentionInput& input);

/// Per-head softmax, mean over heads, sum over text rows. Each text row then
/// contributes exactly 1, so the scores sum to L.
RelevanceScores attention_scores(const AttentionInput& input);

/// Source of layer-k attention operands for a set of surviving patches.
class AttentionProvider {
public:
    virtual ~AttentionProvider() = default;

    /// Operands at `layer` for the vision tokens of `patch_indices` (raster
    /// indices into a grid of `original_count` patches, ascending). Rows of
    /// vision_keys follow the order of patch_indices.
    virtual AttentionInput fetch(int layer, std::span<const std::size_t> patch_indices, std::size_t original_count) = 0;

    /// Number of fetch() calls served so far.
    std::size_t calls() const noexcept { return m_calls.load(); }

protected:
    void count_call() noexcept { m_calls.fetch_add(1); }

private:
    std::atomic<std::size_t> m_calls{0};
};

struct SyntheticAttentionConfig {
    std::uint64_t seed = 0;
    std::size_t num_heads = 4;
    std::size_t head_dim = 32;
    std::size_t text_tokens = 8;
    /// Optional per-patch relevance in [0, 1] (length = original_count). Keys
    /// of relevant patches are pulled toward the shared query topic.
    std::vector<double> relevance;
    double relevance_gain = 1.0;
};

/// Deterministic pseudorandom Q/K generator. With
///   u(tag, head, row, dim) = to_unit(fold(mix64(seed), layer, tag, head, row, dim))
/// where fold applies hash_combine left to right, and tags 'Q', 'K', 'T':
///   topic[h][d] = 2 u('T', h, 0, d) - 1
///   q[h][i][d]  = 2 u('Q', h, i, d) - 1 + topic[h][d]
///   k[h][p][d]  = 2 u('K', h, p, d) - 1 + gain * relevance[p] * topic[h][d]
/// Key rows are keyed by original patch index p, so a patch sees the same key
/// whatever else survived stage 1.
class SyntheticAttentionProvider final : public AttentionProvider {
public:
    explicit SyntheticAttentionProvider(SyntheticAttentionConfig config);

    AttentionInput fetch(int layer, std::span<const std::size_t> patch_indices, std::size_t original_count) override;

    const SyntheticAttentionConfig& config() const noexcept { return m_config; }

    /// Full text-query and key matrices for every patch of the grid, the same
    /// values fetch() would serve.
    AttentionInput full_layer(int layer, std::size_t original_count) const;

private:
    AttentionInput build(int layer, std::span<const std::size_t> patch_indices, std::size_t original_count) const;

    SyntheticAttentionConfig m_config;
};

/// Directory-backed attention dump: manifest.json plus raw little-endian
/// float32 matrices, [head][row][dim], no header.
struct AttentionDumpLayer {
    int index = 0;
    std::string q_file;
    std::string k_file;
};

struct AttentionDumpManifest {
    int format_version = 1;
    std::string model_id;
    int num_layers = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_heads = 0;
    std::size_t head_dim = 0;
    std::size_t num_text_tokens = 0;
    std::size_t num_vision_tokens = 0;
    std::vector<std::size_t> vision_token_patch_indices;
    std::vector<AttentionDumpLayer> layers;
};

AttentionDumpManifest read_dump_manifest(const std::filesystem::path& dir);

/// Structural problems of a dump directory (manifest consistency, file sizes,
/// finiteness); empty when the dump is usable.
std::vector<std::string> check_attention_dump(const std::filesystem::path& dir);

/// Writes manifest.json and the per-layer matrices. `queries[i]` / `keys[i]`
/// belong to manifest.layers[i] and are given in the file layout.
void write_attention_dump(const std::filesystem::path& dir,
                          const AttentionDumpManifest& manifest,
                          std::span<const std::vector<float>> queries,
                          std::span<const std::vector<float>> keys);

/// Serves layers from an attention dump. Read-only after construction; safe
/// for concurrent fetch() calls.
class FileAttentionProvider final : public AttentionProvider {
public:
    /// Throws ProviderError when the dump fails check_attention_dump.
    explicit FileAttentionProvider(std::filesystem::path dir);

    AttentionInput fetch(int layer, std::span<const std::size_t> patch_indices, std::size_t original_count) override;

    const AttentionDumpManifest& manifest() const noexcept { return m_manifest; }

private:
    std::filesystem::path m_dir;
    AttentionDumpManifest m_manifest;
    std::vector<std::size_t> m_token_of_patch;  ///< patch index -> vision token, npos if absent
    std::size_t m_grid_size = 0;
};

}  // namespace erase
