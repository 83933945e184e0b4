// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "erase/attention.hpp"
#include "erase/entropy.hpp"
#include "erase/image.hpp"
#include "erase/kv_model.hpp"
#include "erase/policy.hpp"
#include "erase/selection.hpp"

namespace erase {

/// Early layer for simple images, late layer otherwise.
int choose_layer(double global_entropy, const PruningPolicy& policy);

/// Maps the k_final best relevance scores back to original patch indices.
/// Ties go to the lower original index; a budget at or above the stage-1
/// count returns every stage-1 index.
TokenSelection select_stage2(const RelevanceScores& scores, std::size_t k_final, const TokenSelection& stage1);

struct PipelineOptions {
    /// Overrides the policy's final budget when set.
    std::optional<std::size_t> k_final;
    PadPolicy pad = PadPolicy::EdgeReplicate;
};

struct PipelineResult {
    EntropyMap entropy;
    LevelDecision decision;
    TokenSelection stage1;
    TokenSelection stage2;
    std::size_t k_final = 0;
    bool bypassed = false;
    std::vector<double> stage2_scores;  ///< empty when bypassed
    EvictionPlan eviction;
};

/// Entropy map -> level -> stage-1 top-k -> layer choice -> attention
/// relevance -> stage-2 top-k -> eviction plan. When stage 1 already leaves
/// at most k_final tokens, stage 2 is skipped without querying `attention`.
PipelineResult run_pipeline(const ImageBuffer& img,
                            const PruningPolicy& policy,
                            AttentionProvider& attention,
                            const PipelineOptions& options = {});

/// Same, starting from a precomputed entropy map.
PipelineResult run_pipeline(EntropyMap entropy,
                            const PruningPolicy& policy,
                            AttentionProvider& attention,
                            const PipelineOptions& options = {});

/// Entropy map of an image under a policy's patch size and bin count.
EntropyMap entropy_for_policy(const ImageBuffer& img, const PruningPolicy& policy, PadPolicy pad = PadPolicy::EdgeReplicate);

}  // namespace erase
