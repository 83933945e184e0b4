// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "erase/error.hpp"

namespace erase {

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
    if (std::any_of(scores.begin(), scores.end(), [](double s) { return !std::isfinite(s); })) {
        throw InvalidInput("top-k selection over non-finite scores");
    }
    k = std::min(k, scores.size());
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto before = [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::size_t stage1_budget(std::size_t original_count, double retention) {
    if (!(retention > 0.0 && retention <= 1.0)) {
        throw InvalidInput("stage-1 retention must be in (0, 1], got " + std::to_string(retention));
    }
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(original_count) * retention + 1e-9));
    return std::clamp<std::size_t>(k, 1, original_count);
}

TokenSelection select_stage1(const EntropyMap& map, double retention) {
    if (map.values.empty()) {
        throw InvalidInput("select_stage1: empty entropy map");
    }
    TokenSelection sel;
    sel.original_count = map.values.size();
    sel.stage = Stage::Stage1;
    sel.kept = top_k_indices(map.values, stage1_budget(map.values.size(), retention));
    return sel;
}

}  // namespace erase
