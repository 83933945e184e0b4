// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "erase/entropy.hpp"

namespace erase {

enum class Stage { Stage1, Stage2 };

/// Retained token indices (ascending, into the original M-token grid).
struct TokenSelection {
    std::vector<std::size_t> kept;
    std::size_t original_count = 0;
    Stage stage = Stage::Stage1;

    std::size_t size() const noexcept { return kept.size(); }
    bool operator==(const TokenSelection&) const = default;
};

/// Positions of the k largest scores, ties going to the lower position,
/// returned in ascending position order. k is clamped to scores.size().
/// Throws InvalidInput on non-finite scores.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

/// max(1, floor(M * retention)); a 1e-9 slack absorbs products such as
/// 100 * 0.29 landing one ulp under an integer.
std::size_t stage1_budget(std::size_t original_count, double retention);

/// Keeps the stage1_budget(M, retention) highest-entropy patches.
TokenSelection select_stage1(const EntropyMap& map, double retention);

}  // namespace erase
