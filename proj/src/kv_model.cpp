// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/kv_model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "erase/error.hpp"

namespace erase {

namespace {

struct GeometryRow {
    std::string_view id;
    int layers;
    std::size_t kv_heads;
    std::size_t head_dim;
    std::size_t hidden;
};

constexpr std::array<GeometryRow, 5> kGeometries = {{
    {"qwen2.5-vl-7b", 28, 4, 128, 3584},
    {"qwen2.5-vl-3b", 36, 2, 128, 2048},
    {"qwen3-vl-8b", 36, 8, 128, 4096},
    {"qwen3-vl-4b", 36, 8, 128, 2560},
    {"internvl3-8b", 28, 4, 128, 3584},
}};

}  // namespace

ModelGeometry builtin_geometry(std::string_view model_id) {
    for (const auto& row : kGeometries) {
        if (row.id == model_id) {
            return {std::string(row.id), row.layers, row.kv_heads, row.head_dim, row.hidden, 2};
        }
    }
    std::string known;
    for (const auto& row : kGeometries) {
        known += (known.empty() ? "" : ", ") + std::string(row.id);
    }
    throw LookupError("no KV geometry for model '" + std::string(model_id) + "'; known ids: " + known);
}

KVCacheModel KVCacheModel::uniform(const ModelGeometry& geom, std::size_t vision_tokens, std::size_t text_tokens) {
    KVCacheModel m;
    m.num_layers = geom.num_layers;
    m.kv_heads = geom.kv_heads;
    m.head_dim = geom.head_dim;
    m.bytes_per_elem = geom.bytes_per_elem;
    m.per_layer_tokens.assign(static_cast<std::size_t>(geom.num_layers), vision_tokens);
    m.text_tokens = text_tokens;
    return m;
}

std::uint64_t kv_bytes(const KVCacheModel& model) {
    const std::uint64_t per_token = 2ull * model.kv_heads * model.head_dim * model.bytes_per_elem;
    std::uint64_t total = 0;
    for (const std::size_t n : model.per_layer_tokens) {
        total += per_token * (n + model.text_tokens);
    }
    return total;
}

KVCacheModel apply_eviction(const KVCacheModel& model, const EvictionPlan& plan, std::size_t pre_stage2_tokens) {
    if (plan.upto_layer < 0 || plan.upto_layer > model.num_layers ||
        model.per_layer_tokens.size() != static_cast<std::size_t>(model.num_layers)) {
        throw InvalidInput("eviction layer " + std::to_string(plan.upto_layer) + " outside model of " +
                           std::to_string(model.num_layers) + " layers");
    }
    const std::size_t evict = plan.evict_indices.size();
    if (evict > pre_stage2_tokens) {
        throw InvalidState("cannot evict " + std::to_string(evict) + " of " + std::to_string(pre_stage2_tokens) +
                           " stage-1 tokens");
    }
    KVCacheModel out = model;
    for (int l = 0; l < model.num_layers; ++l) {
        auto& n = out.per_layer_tokens[static_cast<std::size_t>(l)];
        if (l < plan.upto_layer) {
            if (n < evict) {
                throw InvalidState("layer " + std::to_string(l + 1) + " holds " + std::to_string(n) +
                                   " vision entries, cannot evict " + std::to_string(evict));
            }
            n -= evict;
        } else {
            n = std::min(n, pre_stage2_tokens - evict);
        }
    }
    return out;
}

double prefill_cost(const std::vector<std::size_t>& tokens_by_layer, std::size_t hidden_dim) {
    if (tokens_by_layer.empty()) {
        throw InvalidInput("prefill_cost: empty layer schedule");
    }
    const double h = static_cast<double>(hidden_dim);
    const double a = 2.0 * h;
    const double b = 12.0 * h * h;
    double total = 0.0;
    for (const std::size_t tokens : tokens_by_layer) {
        const double n = static_cast<double>(tokens);
        total += a * n * n + b * n;
    }
    return total;
}

std::vector<std::size_t> base_schedule(int num_layers, std::size_t vision_tokens, std::size_t text_tokens) {
    return std::vector<std::size_t>(static_cast<std::size_t>(std::max(num_layers, 0)), vision_tokens + text_tokens);
}

std::vector<std::size_t> pruned_schedule(int num_layers,
                                         std::size_t stage1_tokens,
                                         std::size_t final_tokens,
                                         int stage2_layer,
                                         std::size_t text_tokens) {
    std::vector<std::size_t> s(static_cast<std::size_t>(std::max(num_layers, 0)));
    for (int l = 0; l < num_layers; ++l) {
        s[static_cast<std::size_t>(l)] = (l < stage2_layer ? stage1_tokens : final_tokens) + text_tokens;
    }
    return s;
}

CostReport cost_report(const ModelGeometry& geom,
                       std::size_t vision_tokens,
                       std::size_t stage1_tokens,
                       std::size_t final_tokens,
                       int stage2_layer,
                       std::size_t text_tokens,
                       std::string label) {
    if (final_tokens > stage1_tokens || stage1_tokens > vision_tokens) {
        throw InvalidInput("cost_report expects final <= stage1 <= vision tokens");
    }
    CostReport r;
    r.label = std::move(label);
    r.vision_tokens = vision_tokens;
    r.stage1_tokens = stage1_tokens;
    r.final_tokens = final_tokens;
    r.stage2_layer = stage2_layer;

    const auto base = KVCacheModel::uniform(geom, vision_tokens, text_tokens);
    r.base_kv_bytes = kv_bytes(base);

    // During prefill every layer caches the stage-1 survivors; eviction then
    // trims layers <= k and deeper layers only ever saw the final set.
    EvictionPlan plan;
    plan.evict_indices.resize(stage1_tokens - final_tokens);
    plan.upto_layer = std::clamp(stage2_layer, 0, geom.num_layers);
    const auto before = KVCacheModel::uniform(geom, stage1_tokens, text_tokens);
    r.kv_bytes = kv_bytes(apply_eviction(before, plan, stage1_tokens));

    r.tokens_by_layer = pruned_schedule(geom.num_layers, stage1_tokens, final_tokens, stage2_layer, text_tokens);
    r.prefill_flops = prefill_cost(r.tokens_by_layer, geom.hidden_dim);
    r.base_prefill_flops = prefill_cost(base_schedule(geom.num_layers, vision_tokens, text_tokens), geom.hidden_dim);
    r.kv_reduction = r.kv_bytes > 0 ? static_cast<double>(r.base_kv_bytes) / static_cast<double>(r.kv_bytes) : 0.0;
    r.prefill_speedup = r.prefill_flops > 0.0 ? r.base_prefill_flops / r.prefill_flops : 0.0;
    return r;
}

std::string cost_report_csv_header() {
    return "label,vision_tokens,stage1_tokens,final_tokens,stage2_layer,kv_bytes,kv_mib,base_kv_bytes,"
           "prefill_flops,base_prefill_flops,kv_reduction,prefill_speedup";
}

std::string cost_report_csv_row(const CostReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << r.label << ',' << r.vision_tokens << ',' << r.stage1_tokens << ',' << r.final_tokens << ','
       << r.stage2_layer << ',' << r.kv_bytes << ',' << static_cast<double>(r.kv_bytes) / (1024.0 * 1024.0) << ','
       << r.base_kv_bytes << ',' << r.prefill_flops << ',' << r.base_prefill_flops << ',' << r.kv_reduction << ','
       << r.prefill_speedup;
    return os.str();
}

}  // namespace erase
