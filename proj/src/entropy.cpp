// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/entropy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "erase/error.hpp"

namespace erase {

namespace {

void check_bins(std::size_t bins) {
    if (bins < 2 || bins > 256) {
        throw InvalidInput("histogram bins must be in [2, 256], got " + std::to_string(bins));
    }
}

double histogram_entropy(std::span<const std::uint32_t> counts, std::size_t total) {
    const double n = static_cast<double>(total);
    double h = 0.0;
    std::size_t occupied = 0;
    for (const std::uint32_t c : counts) {
        if (c != 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
            ++occupied;
        }
    }
    // Keep rounding noise inside the exact bounds [0, ln(occupied bins)].
    return std::clamp(h, 0.0, std::log(static_cast<double>(occupied)));
}

}  // namespace

PatchGeometry make_geometry(std::size_t width,
                            std::size_t height,
                            std::size_t patch_h,
                            std::size_t patch_w,
                            PadPolicy pad) {
    if (width == 0 || height == 0) {
        throw InvalidInput("image must have nonzero width and height");
    }
    if (patch_h == 0 || patch_w == 0) {
        throw InvalidInput("patch size must be nonzero");
    }
    if (pad == PadPolicy::Reject && (width % patch_w != 0 || height % patch_h != 0)) {
        throw InvalidInput("image " + std::to_string(width) + "x" + std::to_string(height) +
                           " is not divisible into " + std::to_string(patch_h) + "x" + std::to_string(patch_w) +
                           " patches");
    }
    PatchGeometry g;
    g.patch_h = patch_h;
    g.patch_w = patch_w;
    g.rows = (height + patch_h - 1) / patch_h;
    g.cols = (width + patch_w - 1) / patch_w;
    g.pad_policy = pad;
    return g;
}

double patch_entropy(std::span<const std::uint8_t> pixels, std::size_t bins) {
    check_bins(bins);
    if (pixels.empty()) {
        throw InvalidInput("patch_entropy: empty patch");
    }
    std::array<std::uint32_t, 256> counts{};
    for (const std::uint8_t v : pixels) {
        ++counts[static_cast<std::size_t>(v) * bins / 256];
    }
    return histogram_entropy(std::span<const std::uint32_t>(counts.data(), bins), pixels.size());
}

EntropyMap compute_entropy_map(const ImageBuffer& gray, const PatchGeometry& geom, std::size_t bins) {
    validate_image(gray);
    check_bins(bins);
    if (gray.channels != 1) {
        throw InvalidInput("compute_entropy_map expects a single-channel image");
    }
    const PatchGeometry expected = make_geometry(gray.width, gray.height, geom.patch_h, geom.patch_w, geom.pad_policy);
    if (expected.rows != geom.rows || expected.cols != geom.cols) {
        throw InvalidInput("patch grid " + std::to_string(geom.rows) + "x" + std::to_string(geom.cols) +
                           " does not match image " + std::to_string(gray.width) + "x" +
                           std::to_string(gray.height));
    }

    EntropyMap map;
    map.geometry = geom;
    map.bins = bins;
    map.values.resize(geom.token_count());

    std::array<std::uint32_t, 256> counts{};
    for (std::size_t r = 0; r < geom.rows; ++r) {
        for (std::size_t c = 0; c < geom.cols; ++c) {
            counts.fill(0);
            for (std::size_t dy = 0; dy < geom.patch_h; ++dy) {
                const std::size_t y = std::min(r * geom.patch_h + dy, gray.height - 1);
                const std::uint8_t* row = gray.data.data() + y * gray.width;
                for (std::size_t dx = 0; dx < geom.patch_w; ++dx) {
                    const std::size_t x = std::min(c * geom.patch_w + dx, gray.width - 1);
                    ++counts[static_cast<std::size_t>(row[x]) * bins / 256];
                }
            }
            map.values[r * geom.cols + c] = histogram_entropy(std::span<const std::uint32_t>(counts.data(), bins),
                                                              geom.patch_h * geom.patch_w);
        }
    }
    map.global = global_entropy(map.values);
    return map;
}

double global_entropy(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidInput("global_entropy: no patch values");
    }
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<std::uint16_t> entropy_heatmap(const EntropyMap& map) {
    const double top = std::log(static_cast<double>(map.bins));
    std::vector<std::uint16_t> out(map.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double scaled = std::round(std::clamp(map.values[i] / top, 0.0, 1.0) * 65535.0);
        out[i] = static_cast<std::uint16_t>(scaled);
    }
    return out;
}

}  // namespace erase
