// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace erase {

/// Final vision-token budget after both pruning stages.
struct FinalBudget {
    enum class Mode { Count, Fraction };

    Mode mode = Mode::Fraction;
    double value = 0.15;

    static FinalBudget count(std::size_t k) { return {Mode::Count, static_cast<double>(k)}; }
    static FinalBudget fraction(double f) { return {Mode::Fraction, f}; }

    /// Token count for an image of `original_count` tokens. A fraction converts
    /// as max(1, round(M * f)).
    std::size_t resolve(std::size_t original_count) const;

    bool operator==(const FinalBudget&) const = default;
};

/// Complexity configuration set: N levels separated by N-1 descending
/// entropy thresholds, each with its own stage-1 pruning ratio.
/// Level 1 is the most complex. Layers are 1-based decoder indices.
struct PruningPolicy {
    std::string model_id;
    std::size_t patch_h = 28;
    std::size_t patch_w = 28;
    std::size_t bins = 256;
    std::vector<double> thresholds;    ///< nats, strictly decreasing
    std::vector<double> prune_ratios;  ///< fraction removed, nondecreasing
    int early_layer = 2;
    int late_layer = 17;
    int total_layers = 28;
    FinalBudget final_budget;
    std::string provenance;  ///< free text, not part of the policy schema

    std::size_t level_count() const noexcept { return prune_ratios.size(); }

    /// 1-based index of the threshold splitting simple from complex images:
    /// ceil(|thresholds| / 2).
    std::size_t simple_threshold_index() const noexcept { return (thresholds.size() + 1) / 2; }
};

struct LevelDecision {
    std::size_t level = 1;  ///< 1-based, 1 = most complex
    double stage1_prune_ratio = 0.0;
    double stage1_retention = 1.0;  ///< 1 - stage1_prune_ratio
    int stage2_layer = 0;
    bool is_simple = false;

    bool operator==(const LevelDecision&) const = default;
};

struct PolicyViolation {
    std::string field;
    std::string message;
};

/// Every violated invariant; empty when the policy is usable.
std::vector<PolicyViolation> validate(const PruningPolicy& policy);

/// Throws InvalidInput listing all violations.
void ensure_valid(const PruningPolicy& policy);

/// Level c with theta_c <= H < theta_{c-1} (1-based, theta_0 = +inf,
/// theta_N = -inf): a value equal to a threshold lands in the more complex
/// level. is_simple holds for H <= theta_{ceil(|theta|/2)}.
LevelDecision classify(double global_entropy, const PruningPolicy& policy);

/// Late layer placed at 60% depth, rounded half up.
int late_layer_for_depth(int total_layers);

/// Known model ids, in table order.
std::vector<std::string> builtin_model_ids();

/// Built-in optimized policy for a supported model. Throws LookupError
/// listing the known ids otherwise.
PruningPolicy builtin_policy(std::string_view model_id);

}  // namespace erase
