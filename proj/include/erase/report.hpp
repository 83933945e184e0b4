// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "erase/kv_model.hpp"
#include "erase/policy.hpp"

namespace erase {

/// Vision tokens for an image after its sides are snapped to the nearest
/// multiple of the patch size (at least one patch per side).
std::size_t grid_tokens(std::size_t width, std::size_t height, std::size_t patch_h, std::size_t patch_w);

struct ScalingRow {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t grid_cols = 0;
    std::size_t grid_rows = 0;
    std::size_t tokens = 0;
    CostReport cost;
};

struct ScalingOptions {
    std::vector<std::size_t> sides = {512, 1024, 1536, 2048, 2560, 3072, 3584, 4096};
    double aspect = 1.0;  ///< height / width
    double stage1_prune_ratio = 0.0;
    int stage2_layer = 0;
    std::size_t text_tokens = 0;
};

/// Token count and pruned/unpruned cost per resolution. The final budget is
/// the policy's final budget resolved against each token count.
std::vector<ScalingRow> scaling_table(const ModelGeometry& geom, const PruningPolicy& policy, const ScalingOptions& options);

std::string scaling_csv(const std::vector<ScalingRow>& rows);

/// Modelled KV-cache size next to the published Qwen2.5-VL-7B measurement
/// (16,384 vision tokens, 85% pruned).
struct ReferenceComparison {
    std::size_t tokens = 16384;
    std::size_t kept_tokens = 0;
    double model_base_mib = 0.0;
    double model_pruned_mib = 0.0;
    double model_kv_reduction = 0.0;
    double model_prefill_speedup = 0.0;
    double reference_base_mib = 891.27;
    double reference_pruned_mib = 135.75;
    double reference_kv_reduction = 6.57;
    double reference_prefill_speedup = 1.58;
};

ReferenceComparison reference_comparison(const ModelGeometry& geom, std::size_t tokens = 16384, double keep_fraction = 0.15);

/// Averages over a set of pipeline result documents.
struct CorpusSummary {
    std::size_t count = 0;
    double mean_stage1_prune_ratio = 0.0;
    double mean_stage2_layer = 0.0;
    double mean_final_fraction = 0.0;  ///< stage-2 count over original count
    std::size_t bypassed = 0;
    std::vector<std::size_t> level_counts;  ///< index 0 = level 1
};

/// Throws InvalidInput on an empty set or a document missing the result keys.
CorpusSummary summarize_results(const std::vector<nlohmann::json>& results);

nlohmann::json to_json(const ScalingRow& r);
nlohmann::json to_json(const ReferenceComparison& r);
nlohmann::json to_json(const CorpusSummary& s);

}  // namespace erase
