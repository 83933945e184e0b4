// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "erase/entropy.hpp"
#include "erase/kv_model.hpp"
#include "erase/pipeline.hpp"
#include "erase/policy.hpp"
#include "erase/selection.hpp"

namespace erase {

nlohmann::json to_json(const PatchGeometry& g);
nlohmann::json to_json(const EntropyMap& map);
nlohmann::json to_json(const LevelDecision& d);
nlohmann::json to_json(const TokenSelection& s);
nlohmann::json to_json(const CostReport& r);

/// {decision, bypassed, stage1_count, stage2_count, stage2_layer,
///  kept_indices, ...} -- the first six keys are the stable contract.
nlohmann::json to_json(const PipelineResult& r);

/// Policy document: {model_id, patch_h, patch_w, bins, thresholds,
/// prune_ratios, early_layer, late_layer, total_layers,
/// final_budget: {mode: "count"|"fraction", value}}.
nlohmann::json policy_to_json(const PruningPolicy& p);

/// Parses and validates a policy document. Throws InvalidInput.
PruningPolicy policy_from_json(const nlohmann::json& j);

/// Reads a policy file. Throws IoError / InvalidInput.
PruningPolicy load_policy(const std::filesystem::path& path);

/// Either a built-in model id or a path to a policy JSON file.
PruningPolicy resolve_policy(const std::string& id_or_path);

/// Pretty-prints `j` to `path` with a trailing newline. Throws IoError.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Binary mask over the patch grid (255 = kept), one pixel per patch.
ImageBuffer selection_mask(const TokenSelection& sel, const PatchGeometry& geom);

}  // namespace erase
