// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "erase/error.hpp"

namespace erase {

namespace {

struct BuiltinRow {
    std::string_view id;
    std::array<double, 3> thresholds;
    std::array<double, 4> prune_pct;
    int early_layer;
    int total_layers;
    std::size_t patch;
};

// Thresholds in nats, pruning ratios in percent. Qwen3-VL uses 16px ViT
// patches merged 2x2 (32px tokens); the others 14px merged 2x2 (28px).
constexpr std::array<BuiltinRow, 5> kBuiltins = {{
    {"qwen2.5-vl-7b", {1.69, 1.35, 1.17}, {17.32, 24.86, 50.53, 59.66}, 2, 28, 28},
    {"qwen2.5-vl-3b", {2.06, 1.41, 0.89}, {11.34, 16.79, 55.80, 61.28}, 2, 36, 28},
    {"qwen3-vl-8b", {1.61, 0.22, 0.06}, {15.50, 22.37, 24.26, 80.60}, 4, 36, 32},
    {"qwen3-vl-4b", {4.92, 0.64, 0.55}, {17.88, 20.66, 54.21, 74.67}, 4, 36, 32},
    {"internvl3-8b", {3.98, 0.70, 0.59}, {15.86, 23.88, 30.68, 67.58}, 2, 28, 28},
}};

}  // namespace

std::size_t FinalBudget::resolve(std::size_t original_count) const {
    if (mode == Mode::Count) {
        return static_cast<std::size_t>(std::max(1.0, value));
    }
    const double k = std::round(static_cast<double>(original_count) * value);
    return static_cast<std::size_t>(std::max(1.0, k));
}

std::vector<PolicyViolation> validate(const PruningPolicy& policy) {
    std::vector<PolicyViolation> out;
    const auto& th = policy.thresholds;
    const auto& pr = policy.prune_ratios;

    if (pr.size() < 2) {
        out.push_back({"prune_ratios", "at least two complexity levels required"});
    }
    if (th.size() + 1 != pr.size()) {
        out.push_back({"thresholds", "expected " + std::to_string(pr.empty() ? 0 : pr.size() - 1) +
                                         " thresholds for " + std::to_string(pr.size()) + " levels, got " +
                                         std::to_string(th.size())});
    }
    if (std::any_of(th.begin(), th.end(), [](double t) { return !std::isfinite(t) || t <= 0.0; })) {
        out.push_back({"thresholds", "thresholds must be finite and positive"});
    }
    for (std::size_t i = 1; i < th.size(); ++i) {
        if (!(th[i] < th[i - 1])) {
            out.push_back({"thresholds", "thresholds not strictly decreasing"});
            break;
        }
    }
    if (std::any_of(pr.begin(), pr.end(), [](double p) { return !(p >= 0.0 && p <= 1.0); })) {
        out.push_back({"prune_ratios", "ratios must lie in [0, 1]"});
    }
    for (std::size_t i = 1; i < pr.size(); ++i) {
        if (pr[i] < pr[i - 1]) {
            out.push_back({"prune_ratios", "ratios not nondecreasing"});
            break;
        }
    }
    if (policy.early_layer < 1) {
        out.push_back({"early_layer", "early_layer must be >= 1"});
    }
    if (policy.early_layer >= policy.late_layer) {
        out.push_back({"late_layer", "early_layer must be < late_layer"});
    }
    if (policy.late_layer > policy.total_layers) {
        out.push_back({"late_layer", "late_layer must be <= total_layers"});
    }
    if (policy.patch_h == 0 || policy.patch_w == 0) {
        out.push_back({"patch_h", "patch size must be nonzero"});
    }
    if (policy.bins < 2 || policy.bins > 256) {
        out.push_back({"bins", "bins must be in [2, 256]"});
    }
    const auto& fb = policy.final_budget;
    if (fb.mode == FinalBudget::Mode::Fraction && !(fb.value > 0.0 && fb.value <= 1.0)) {
        out.push_back({"final_budget", "fraction must be in (0, 1]"});
    }
    if (fb.mode == FinalBudget::Mode::Count && !(fb.value >= 1.0 && fb.value == std::floor(fb.value))) {
        out.push_back({"final_budget", "count must be a positive integer"});
    }
    return out;
}

void ensure_valid(const PruningPolicy& policy) {
    const auto violations = validate(policy);
    if (violations.empty()) {
        return;
    }
    std::ostringstream msg;
    msg << "invalid pruning policy";
    if (!policy.model_id.empty()) {
        msg << " '" << policy.model_id << "'";
    }
    for (const auto& v : violations) {
        msg << "; " << v.field << ": " << v.message;
    }
    throw InvalidInput(msg.str());
}

LevelDecision classify(double global_entropy, const PruningPolicy& policy) {
    if (!std::isfinite(global_entropy)) {
        throw InvalidInput("classify: global entropy must be finite");
    }
    const auto& th = policy.thresholds;
    if (th.size() + 1 != policy.prune_ratios.size()) {
        throw InvalidInput("classify: threshold/level count mismatch");
    }
    // c - 1 thresholds lie strictly above H; an H equal to a threshold stays
    // in the more complex level.
    const auto above = std::count_if(th.begin(), th.end(), [&](double t) { return global_entropy < t; });
    LevelDecision d;
    d.level = static_cast<std::size_t>(above) + 1;
    d.stage1_prune_ratio = policy.prune_ratios[d.level - 1];
    d.stage1_retention = 1.0 - d.stage1_prune_ratio;
    const std::size_t split = policy.simple_threshold_index();
    d.is_simple = split == 0 || global_entropy <= th[split - 1];
    d.stage2_layer = d.is_simple ? policy.early_layer : policy.late_layer;
    return d;
}

int late_layer_for_depth(int total_layers) {
    return static_cast<int>(std::floor(0.6 * total_layers + 0.5));
}

std::vector<std::string> builtin_model_ids() {
    std::vector<std::string> ids;
    for (const auto& row : kBuiltins) {
        ids.emplace_back(row.id);
    }
    return ids;
}

PruningPolicy builtin_policy(std::string_view model_id) {
    for (const auto& row : kBuiltins) {
        if (row.id != model_id) {
            continue;
        }
        PruningPolicy p;
        p.model_id = std::string(row.id);
        p.patch_h = row.patch;
        p.patch_w = row.patch;
        p.thresholds.assign(row.thresholds.begin(), row.thresholds.end());
        for (const double pct : row.prune_pct) {
            p.prune_ratios.push_back(pct / 100.0);
        }
        p.early_layer = row.early_layer;
        p.total_layers = row.total_layers;
        p.late_layer = late_layer_for_depth(row.total_layers);
        p.final_budget = FinalBudget::fraction(0.15);
        p.provenance = "builtin:" + p.model_id + " (published Bayesian-optimized thresholds and ratios)";
        return p;
    }
    std::string known;
    for (const auto& row : kBuiltins) {
        known += known.empty() ? "" : ", ";
        known += row.id;
    }
    throw LookupError("unknown model id '" + std::string(model_id) + "'; known ids: " + known);
}

}  // namespace erase
