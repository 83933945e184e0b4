// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "erase/error.hpp"

namespace erase {

void validate_image(const ImageBuffer& img) {
    if (img.width == 0 || img.height == 0) {
        throw InvalidInput("image must have nonzero width and height");
    }
    if (img.channels != 1 && img.channels != 3) {
        throw InvalidInput("image channels must be 1 or 3, got " + std::to_string(img.channels));
    }
    if (img.data.size() != img.width * img.height * img.channels) {
        throw InvalidInput("image data length " + std::to_string(img.data.size()) + " does not match " +
                           std::to_string(img.width) + "x" + std::to_string(img.height) + "x" +
                           std::to_string(img.channels));
    }
}

ImageBuffer to_luminance(const ImageBuffer& img) {
    validate_image(img);
    if (img.channels == 1) {
        return img;
    }
    ImageBuffer out(img.width, img.height, 1);
    const std::size_t n = img.width * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = img.data[3 * i];
        const double g = img.data[3 * i + 1];
        const double b = img.data[3 * i + 2];
        const double y = std::round(0.299 * r + 0.587 * g + 0.114 * b);
        out.data[i] = static_cast<std::uint8_t>(std::clamp(y, 0.0, 255.0));
    }
    return out;
}

}  // namespace erase
