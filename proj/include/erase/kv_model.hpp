// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace erase {

/// Decoder geometry relevant to KV-cache size and prefill cost.
struct ModelGeometry {
    std::string model_id;
    int num_layers = 28;
    std::size_t kv_heads = 4;
    std::size_t head_dim = 128;
    std::size_t hidden_dim = 3584;
    std::size_t bytes_per_elem = 2;
};

/// Geometry of a built-in model. These figures come from the public model
/// configs; Qwen2.5-VL-7B is cross-checked against the published 16K-token
/// KV-cache measurement (~0.5% off, the gap being the unreported prompt).
ModelGeometry builtin_geometry(std::string_view model_id);

/// Per-layer KV-cache occupancy. per_layer_tokens counts vision tokens
/// (index 0 = layer 1); text tokens are held in every layer and never evicted.
struct KVCacheModel {
    int num_layers = 0;
    std::size_t kv_heads = 0;
    std::size_t head_dim = 0;
    std::size_t bytes_per_elem = 2;
    std::vector<std::size_t> per_layer_tokens;
    std::size_t text_tokens = 0;

    static KVCacheModel uniform(const ModelGeometry& geom, std::size_t vision_tokens, std::size_t text_tokens = 0);
};

/// Vision tokens dropped by stage 2 (stage-1 set minus stage-2 set), to be
/// removed from layers 1..upto_layer.
struct EvictionPlan {
    std::vector<std::size_t> evict_indices;
    int upto_layer = 0;

    bool empty() const noexcept { return evict_indices.empty(); }
};

/// Sum over layers of 2 (K and V) x kv_heads x head_dim x tokens x bytes.
std::uint64_t kv_bytes(const KVCacheModel& model);

/// Removes |evict| entries from every layer <= upto_layer and caps deeper
/// layers at the post-stage-2 count (pre_stage2_tokens - |evict|); those
/// layers only ever hold survivors. Throws InvalidState if a layer holds
/// fewer entries than would be evicted, InvalidInput if upto_layer is out of range.
KVCacheModel apply_eviction(const KVCacheModel& model, const EvictionPlan& plan, std::size_t pre_stage2_tokens);

/// Relative prefill cost: sum over layers of 2h n^2 (scores and weighted
/// values) + 12 h^2 n (QKV/output projections and a 4x MLP), h = hidden_dim.
/// An analytical model, not wall-clock time.
double prefill_cost(const std::vector<std::size_t>& tokens_by_layer, std::size_t hidden_dim);

/// Tokens entering each layer without pruning.
std::vector<std::size_t> base_schedule(int num_layers, std::size_t vision_tokens, std::size_t text_tokens);

/// Tokens entering each layer with stage-1 pruning before layer 1 and stage-2
/// pruning after layer `stage2_layer`.
std::vector<std::size_t> pruned_schedule(int num_layers,
                                         std::size_t stage1_tokens,
                                         std::size_t final_tokens,
                                         int stage2_layer,
                                         std::size_t text_tokens);

struct CostReport {
    std::string label;
    std::size_t vision_tokens = 0;
    std::size_t stage1_tokens = 0;
    std::size_t final_tokens = 0;
    int stage2_layer = 0;
    std::uint64_t kv_bytes = 0;
    std::uint64_t base_kv_bytes = 0;
    double prefill_flops = 0.0;
    double base_prefill_flops = 0.0;
    std::vector<std::size_t> tokens_by_layer;
    double kv_reduction = 1.0;     ///< base / pruned
    double prefill_speedup = 1.0;  ///< base / pruned
};

/// Cost of one pruned request against the unpruned baseline. The KV cache is
/// measured after retrospective eviction, so every layer holds final_tokens.
CostReport cost_report(const ModelGeometry& geom,
                       std::size_t vision_tokens,
                       std::size_t stage1_tokens,
                       std::size_t final_tokens,
                       int stage2_layer,
                       std::size_t text_tokens = 0,
                       std::string label = {});

/// CSV header matching cost_report_csv_row.
std::string cost_report_csv_header();
std::string cost_report_csv_row(const CostReport& r);

}  // namespace erase
