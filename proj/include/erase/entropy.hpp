// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "erase/image.hpp"

namespace erase {

inline constexpr std::size_t kDefaultBins = 256;

enum class PadPolicy {
    EdgeReplicate,  ///< Border patches are completed by clamping coordinates.
    Reject,         ///< Dimensions must be multiples of the patch size.
};

/// Vision-token patch grid laid over an image, in raster order.
struct PatchGeometry {
    std::size_t patch_h = 28;
    std::size_t patch_w = 28;
    std::size_t rows = 0;
    std::size_t cols = 0;
    PadPolicy pad_policy = PadPolicy::EdgeReplicate;

    std::size_t token_count() const noexcept { return rows * cols; }
    bool operator==(const PatchGeometry&) const = default;
};

/// Builds the grid for a width x height image: rows = ceil(h / patch_h),
/// cols = ceil(w / patch_w). With PadPolicy::Reject, non-divisible sizes throw.
PatchGeometry make_geometry(std::size_t width,
                            std::size_t height,
                            std::size_t patch_h,
                            std::size_t patch_w,
                            PadPolicy pad = PadPolicy::EdgeReplicate);

/// Per-patch Shannon entropies in nats plus their median.
struct EntropyMap {
    std::vector<double> values;
    PatchGeometry geometry;
    std::size_t bins = kDefaultBins;
    double global = 0.0;
};

/// Entropy in nats of the histogram of `pixels`, where value v falls in bin
/// floor(v * bins / 256). Requires a nonempty patch and bins in [2, 256].
double patch_entropy(std::span<const std::uint8_t> pixels, std::size_t bins = kDefaultBins);

/// Entropy of every patch of a single-channel image, raster order.
EntropyMap compute_entropy_map(const ImageBuffer& gray, const PatchGeometry& geom, std::size_t bins = kDefaultBins);

/// Median of the patch entropies; for an even count, the mean of the two
/// central order statistics.
double global_entropy(std::span<const double> values);
inline double global_entropy(const EntropyMap& map) { return global_entropy(map.values); }

/// Heatmap samples, one per patch: round(value / ln(bins) * 65535).
std::vector<std::uint16_t> entropy_heatmap(const EntropyMap& map);

}  // namespace erase
