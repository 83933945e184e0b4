// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "erase/error.hpp"
#include "erase/selection.hpp"
#include "erase/serialize.hpp"

namespace erase {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

std::size_t snap(std::size_t side, std::size_t patch) {
    const auto cells = static_cast<std::size_t>(std::llround(static_cast<double>(side) / static_cast<double>(patch)));
    return std::max<std::size_t>(cells, 1);
}

}  // namespace

std::size_t grid_tokens(std::size_t width, std::size_t height, std::size_t patch_h, std::size_t patch_w) {
    if (patch_h == 0 || patch_w == 0) {
        throw InvalidInput("patch size must be positive");
    }
    return snap(width, patch_w) * snap(height, patch_h);
}

std::vector<ScalingRow> scaling_table(const ModelGeometry& geom, const PruningPolicy& policy, const ScalingOptions& options) {
    if (!(options.aspect > 0.0) || !std::isfinite(options.aspect)) {
        throw InvalidInput("aspect must be positive");
    }
    if (!(options.stage1_prune_ratio >= 0.0 && options.stage1_prune_ratio < 1.0)) {
        throw InvalidInput("stage-1 prune ratio must be in [0, 1)");
    }
    std::vector<ScalingRow> rows;
    for (const std::size_t side : options.sides) {
        if (side == 0) {
            throw InvalidInput("image side must be positive");
        }
        ScalingRow r;
        r.width = side;
        r.height = static_cast<std::size_t>(std::llround(static_cast<double>(side) * options.aspect));
        r.grid_cols = snap(r.width, policy.patch_w);
        r.grid_rows = snap(r.height, policy.patch_h);
        r.tokens = r.grid_cols * r.grid_rows;
        const std::size_t s1 = stage1_budget(r.tokens, 1.0 - options.stage1_prune_ratio);
        const std::size_t fin = std::min(s1, policy.final_budget.resolve(r.tokens));
        r.cost = cost_report(geom, r.tokens, s1, fin, options.stage2_layer, options.text_tokens,
                             std::to_string(r.width) + "x" + std::to_string(r.height));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "width,height,grid_cols,grid_rows,tokens,stage1_tokens,final_tokens,stage2_layer,base_kv_bytes,kv_bytes,"
          "kv_reduction,base_prefill_flops,prefill_flops,prefill_speedup\n";
    for (const auto& r : rows) {
        os << r.width << ',' << r.height << ',' << r.grid_cols << ',' << r.grid_rows << ',' << r.tokens << ','
           << r.cost.stage1_tokens << ',' << r.cost.final_tokens << ',' << r.cost.stage2_layer << ','
           << r.cost.base_kv_bytes << ',' << r.cost.kv_bytes << ',' << r.cost.kv_reduction << ','
           << r.cost.base_prefill_flops << ',' << r.cost.prefill_flops << ',' << r.cost.prefill_speedup << '\n';
    }
    return os.str();
}

ReferenceComparison reference_comparison(const ModelGeometry& geom, std::size_t tokens, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw InvalidInput("keep fraction must be in (0, 1]");
    }
    ReferenceComparison c;
    c.tokens = tokens;
    c.kept_tokens = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(tokens) * keep_fraction)));
    const auto r = cost_report(geom, tokens, c.kept_tokens, c.kept_tokens, 0, 0, "reference");
    c.model_base_mib = static_cast<double>(r.base_kv_bytes) / kMiB;
    c.model_pruned_mib = static_cast<double>(r.kv_bytes) / kMiB;
    c.model_kv_reduction = r.kv_reduction;
    c.model_prefill_speedup = r.prefill_speedup;
    return c;
}

CorpusSummary summarize_results(const std::vector<nlohmann::json>& results) {
    if (results.empty()) {
        throw InvalidInput("report needs at least one result");
    }
    CorpusSummary s;
    try {
        for (const auto& j : results) {
            const auto& d = j.at("decision");
            const auto level = d.at("level").get<std::size_t>();
            if (level == 0) {
                throw InvalidInput("result has level 0");
            }
            if (s.level_counts.size() < level) {
                s.level_counts.resize(level, 0);
            }
            ++s.level_counts[level - 1];
            s.mean_stage1_prune_ratio += d.at("stage1_prune_ratio").get<double>();
            s.mean_stage2_layer += d.at("stage2_layer").get<double>();
            s.mean_final_fraction += j.at("stage2_count").get<double>() / j.at("original_count").get<double>();
            s.bypassed += j.at("bypassed").get<bool>() ? 1 : 0;
            ++s.count;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed result document: ") + e.what());
    }
    const auto n = static_cast<double>(s.count);
    s.mean_stage1_prune_ratio /= n;
    s.mean_stage2_layer /= n;
    s.mean_final_fraction /= n;
    return s;
}

nlohmann::json to_json(const ScalingRow& r) {
    nlohmann::json j = to_json(r.cost);
    j["width"] = r.width;
    j["height"] = r.height;
    j["grid_cols"] = r.grid_cols;
    j["grid_rows"] = r.grid_rows;
    j["tokens"] = r.tokens;
    return j;
}

nlohmann::json to_json(const ReferenceComparison& r) {
    return {{"tokens", r.tokens},
            {"kept_tokens", r.kept_tokens},
            {"model", {{"base_mib", r.model_base_mib},
                       {"pruned_mib", r.model_pruned_mib},
                       {"kv_reduction", r.model_kv_reduction},
                       {"prefill_speedup", r.model_prefill_speedup}}},
            {"published", {{"base_mib", r.reference_base_mib},
                           {"pruned_mib", r.reference_pruned_mib},
                           {"kv_reduction", r.reference_kv_reduction},
                           {"prefill_speedup", r.reference_prefill_speedup}}}};
}

nlohmann::json to_json(const CorpusSummary& s) {
    return {{"count", s.count},
            {"mean_stage1_prune_ratio", s.mean_stage1_prune_ratio},
            {"mean_stage2_layer", s.mean_stage2_layer},
            {"mean_final_fraction", s.mean_final_fraction},
            {"bypassed", s.bypassed},
            {"level_counts", s.level_counts}};
}

}  // namespace erase
