// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "erase/image.hpp"

namespace erase::io {

/// Decodes a PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary
/// PGM/PPM (P5/P6). Alpha is dropped, 16-bit samples are reduced to their
/// high byte. Throws IoError naming the path on any failure.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit gray or RGB PNG.
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

/// Writes a 16-bit grayscale PNG from row-major samples.
void write_png_gray16(const std::filesystem::path& path,
                      std::size_t width,
                      std::size_t height,
                      std::span<const std::uint16_t> samples);

/// Writes a binary PGM (1 channel) or PPM (3 channels).
void write_pnm(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace erase::io
