// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace erase {

/// 8-bit image, row-major, channel-interleaved.
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> data;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(w * h * c, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) {
        return data[(y * width + x) * channels + c];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return data[(y * width + x) * channels + c];
    }

    bool operator==(const ImageBuffer&) const = default;
};

/// Throws InvalidInput unless dimensions are nonzero, channels is 1 or 3 and
/// the sample count matches.
void validate_image(const ImageBuffer& img);

/// BT.601 luma, round(0.299 R + 0.587 G + 0.114 B). Single-channel input is
/// returned unchanged.
ImageBuffer to_luminance(const ImageBuffer& img);

}  // namespace erase
