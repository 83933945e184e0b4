// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/pipeline.hpp"

#include <algorithm>
#include <iterator>
#include <string>
#include <utility>

#include "erase/error.hpp"

namespace erase {

int choose_layer(double global_entropy, const PruningPolicy& policy) {
    return classify(global_entropy, policy).stage2_layer;
}

TokenSelection select_stage2(const RelevanceScores& scores, std::size_t k_final, const TokenSelection& stage1) {
    if (k_final == 0) {
        throw InvalidInput("select_stage2: k_final must be >= 1");
    }
    if (scores.values.size() != stage1.kept.size()) {
        throw InvalidInput("select_stage2: " + std::to_string(scores.values.size()) + " scores for " +
                           std::to_string(stage1.kept.size()) + " stage-1 tokens");
    }
    TokenSelection out;
    out.original_count = stage1.original_count;
    out.stage = Stage::Stage2;
    // stage1.kept ascends, so lower position == lower original index.
    for (const std::size_t pos : top_k_indices(scores.values, k_final)) {
        out.kept.push_back(stage1.kept[pos]);
    }
    return out;
}

EntropyMap entropy_for_policy(const ImageBuffer& img, const PruningPolicy& policy, PadPolicy pad) {
    const ImageBuffer gray = to_luminance(img);
    const PatchGeometry geom = make_geometry(gray.width, gray.height, policy.patch_h, policy.patch_w, pad);
    return compute_entropy_map(gray, geom, policy.bins);
}

PipelineResult run_pipeline(const ImageBuffer& img,
                            const PruningPolicy& policy,
                            AttentionProvider& attention,
                            const PipelineOptions& options) {
    ensure_valid(policy);
    return run_pipeline(entropy_for_policy(img, policy, options.pad), policy, attention, options);
}

PipelineResult run_pipeline(EntropyMap entropy,
                            const PruningPolicy& policy,
                            AttentionProvider& attention,
                            const PipelineOptions& options) {
    ensure_valid(policy);
    if (entropy.values.empty()) {
        throw InvalidInput("run_pipeline: empty entropy map");
    }
    PipelineResult r;
    r.entropy = std::move(entropy);
    const std::size_t M = r.entropy.values.size();

    r.decision = classify(r.entropy.global, policy);
    // A ratio of 1 still keeps one token (stage1_budget floors at 1).
    r.stage1 = select_stage1(r.entropy, std::max(r.decision.stage1_retention, 1e-12));

    r.k_final = options.k_final.value_or(policy.final_budget.resolve(M));
    if (r.k_final == 0) {
        throw InvalidInput("run_pipeline: k_final must be >= 1");
    }
    const int layer = r.decision.stage2_layer;
    r.eviction.upto_layer = layer;

    if (r.stage1.size() <= r.k_final) {
        r.bypassed = true;
        r.stage2 = r.stage1;
        r.stage2.stage = Stage::Stage2;
        return r;
    }

    const AttentionInput input = attention.fetch(layer, r.stage1.kept, M);
    if (input.vision_tokens != r.stage1.size()) {
        throw ProviderError("attention provider returned " + std::to_string(input.vision_tokens) +
                            " vision tokens for " + std::to_string(r.stage1.size()) + " requested");
    }
    RelevanceScores scores = attention_scores(input);
    r.stage2 = select_stage2(scores, r.k_final, r.stage1);
    r.stage2_scores = std::move(scores.values);

    std::set_difference(r.stage1.kept.begin(), r.stage1.kept.end(), r.stage2.kept.begin(), r.stage2.kept.end(),
                        std::back_inserter(r.eviction.evict_indices));
    return r;
}

}  // namespace erase
