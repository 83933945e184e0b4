// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/serialize.hpp"

#include <fstream>

#include "erase/error.hpp"

namespace erase {

using nlohmann::json;

json to_json(const PatchGeometry& g) {
    return {{"patch_h", g.patch_h},
            {"patch_w", g.patch_w},
            {"rows", g.rows},
            {"cols", g.cols},
            {"pad_policy", g.pad_policy == PadPolicy::EdgeReplicate ? "edge-replicate" : "reject"}};
}

json to_json(const EntropyMap& map) {
    return {{"geometry", to_json(map.geometry)}, {"bins", map.bins}, {"global", map.global}, {"values", map.values}};
}

json to_json(const LevelDecision& d) {
    return {{"level", d.level},
            {"stage1_prune_ratio", d.stage1_prune_ratio},
            {"stage1_retention", d.stage1_retention},
            {"stage2_layer", d.stage2_layer},
            {"is_simple", d.is_simple}};
}

json to_json(const TokenSelection& s) {
    return {{"original_count", s.original_count},
            {"stage", s.stage == Stage::Stage1 ? "stage1" : "stage2"},
            {"kept", s.kept}};
}

json to_json(const CostReport& r) {
    return {{"label", r.label},
            {"vision_tokens", r.vision_tokens},
            {"stage1_tokens", r.stage1_tokens},
            {"final_tokens", r.final_tokens},
            {"stage2_layer", r.stage2_layer},
            {"kv_bytes", r.kv_bytes},
            {"base_kv_bytes", r.base_kv_bytes},
            {"prefill_flops", r.prefill_flops},
            {"base_prefill_flops", r.base_prefill_flops},
            {"tokens_by_layer", r.tokens_by_layer},
            {"speedup_vs_base", {{"kv_cache", r.kv_reduction}, {"prefill", r.prefill_speedup}}}};
}

json to_json(const PipelineResult& r) {
    return {{"decision", to_json(r.decision)},
            {"bypassed", r.bypassed},
            {"stage1_count", r.stage1.size()},
            {"stage2_count", r.stage2.size()},
            {"stage2_layer", r.decision.stage2_layer},
            {"kept_indices", r.stage2.kept},
            {"original_count", r.stage1.original_count},
            {"global_entropy", r.entropy.global},
            {"k_final", r.k_final},
            {"stage1_kept", r.stage1.kept},
            {"stage2_scores", r.stage2_scores},
            {"evicted", {{"upto_layer", r.eviction.upto_layer}, {"indices", r.eviction.evict_indices}}}};
}

json policy_to_json(const PruningPolicy& p) {
    const bool count = p.final_budget.mode == FinalBudget::Mode::Count;
    json budget = {{"mode", count ? "count" : "fraction"}};
    if (count) {
        budget["value"] = static_cast<std::size_t>(p.final_budget.value);
    } else {
        budget["value"] = p.final_budget.value;
    }
    return {{"model_id", p.model_id},
            {"patch_h", p.patch_h},
            {"patch_w", p.patch_w},
            {"bins", p.bins},
            {"thresholds", p.thresholds},
            {"prune_ratios", p.prune_ratios},
            {"early_layer", p.early_layer},
            {"late_layer", p.late_layer},
            {"total_layers", p.total_layers},
            {"final_budget", budget}};
}

PruningPolicy policy_from_json(const json& j) {
    PruningPolicy p;
    try {
        p.model_id = j.value("model_id", std::string{});
        p.patch_h = j.at("patch_h").get<std::size_t>();
        p.patch_w = j.at("patch_w").get<std::size_t>();
        p.bins = j.at("bins").get<std::size_t>();
        p.thresholds = j.at("thresholds").get<std::vector<double>>();
        p.prune_ratios = j.at("prune_ratios").get<std::vector<double>>();
        p.early_layer = j.at("early_layer").get<int>();
        p.late_layer = j.at("late_layer").get<int>();
        p.total_layers = j.at("total_layers").get<int>();
        const auto& fb = j.at("final_budget");
        const auto mode = fb.at("mode").get<std::string>();
        if (mode == "count") {
            p.final_budget = {FinalBudget::Mode::Count, fb.at("value").get<double>()};
        } else if (mode == "fraction") {
            p.final_budget = {FinalBudget::Mode::Fraction, fb.at("value").get<double>()};
        } else {
            throw InvalidInput("final_budget.mode must be \"count\" or \"fraction\", got \"" + mode + "\"");
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed policy document: ") + e.what());
    }
    ensure_valid(p);
    return p;
}

PruningPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open policy file '" + path.string() + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput("policy file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    PruningPolicy p = policy_from_json(j);
    p.provenance = "file:" + path.string();
    return p;
}

PruningPolicy resolve_policy(const std::string& id_or_path) {
    for (const auto& id : builtin_model_ids()) {
        if (id == id_or_path) {
            return builtin_policy(id);
        }
    }
    if (std::filesystem::exists(id_or_path)) {
        return load_policy(id_or_path);
    }
    // Re-raise as a lookup failure listing the known ids.
    return builtin_policy(id_or_path);
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

ImageBuffer selection_mask(const TokenSelection& sel, const PatchGeometry& geom) {
    if (sel.original_count != geom.token_count()) {
        throw InvalidInput("selection over " + std::to_string(sel.original_count) + " tokens does not match a " +
                           std::to_string(geom.rows) + "x" + std::to_string(geom.cols) + " grid");
    }
    ImageBuffer mask(geom.cols, geom.rows, 1, 0);
    for (const std::size_t i : sel.kept) {
        mask.data[i] = 255;
    }
    return mask;
}

}  // namespace erase
