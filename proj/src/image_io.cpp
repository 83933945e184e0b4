// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/image_io.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "erase/error.hpp"

namespace erase::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return f;
}

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) {
        *text = msg;
    }
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

bool has_png_signature(std::FILE* f) {
    png_byte sig[8] = {};
    const bool ok = std::fread(sig, 1, 8, f) == 8 && png_sig_cmp(sig, 0, 8) == 0;
    std::rewind(f);
    return ok;
}

ImageBuffer read_png(std::FILE* f, const std::filesystem::path& path) {
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png) {
        throw IoError("libpng initialisation failed for '" + path.string() + "'");
    }
    png_infop info = png_create_info_struct(png);
    ImageBuffer img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("cannot decode PNG '" + path.string() + "': " + error);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) {
        png_set_strip_16(png);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel layout in '" + path.string() + "'");
    }
    img.data.resize(img.width * img.height * img.channels);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = img.data.data() + y * img.width * img.channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// Reads one whitespace/comment-delimited header token of a PNM file.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = in.get();
            }
        } else if (std::isspace(c)) {
            if (!tok.empty()) {
                break;
            }
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok;
}

ImageBuffer read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    const std::string magic = pnm_token(in);
    if (magic != "P5" && magic != "P6") {
        throw IoError("unsupported image format in '" + path.string() + "' (expected PNG, P5 or P6)");
    }
    std::size_t w = 0;
    std::size_t h = 0;
    int maxval = 0;
    try {
        w = std::stoul(pnm_token(in));
        h = std::stoul(pnm_token(in));
        maxval = std::stoi(pnm_token(in));
    } catch (const std::exception&) {
        throw IoError("malformed PNM header in '" + path.string() + "'");
    }
    if (w == 0 || h == 0 || maxval != 255) {
        throw IoError("unsupported PNM geometry or maxval in '" + path.string() + "'");
    }
    ImageBuffer img(w, h, magic == "P5" ? 1 : 3);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
        throw IoError("truncated PNM data in '" + path.string() + "'");
    }
    return img;
}

void write_png_rows(const std::filesystem::path& path,
                    std::size_t width,
                    std::size_t height,
                    int bit_depth,
                    int color_type,
                    const std::vector<png_bytep>& rows) {
    auto f = open_file(path, "wb");
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png) {
        throw IoError("libpng initialisation failed for '" + path.string() + "'");
    }
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("cannot encode PNG '" + path.string() + "': " + error);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png,
                 info,
                 static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height),
                 bit_depth,
                 color_type,
                 PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    if (has_png_signature(f.get())) {
        return read_png(f.get(), path);
    }
    f.reset();
    return read_pnm(path);
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
    if (img.width == 0 || img.height == 0 || (img.channels != 1 && img.channels != 3) ||
        img.data.size() != img.width * img.height * img.channels) {
        throw InvalidInput("cannot write malformed image to '" + path.string() + "'");
    }
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(img.data.data() + y * img.width * img.channels);
    }
    write_png_rows(path, img.width, img.height, 8, img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows);
}

void write_png_gray16(const std::filesystem::path& path,
                      std::size_t width,
                      std::size_t height,
                      std::span<const std::uint16_t> samples) {
    if (width == 0 || height == 0 || samples.size() != width * height) {
        throw InvalidInput("cannot write malformed 16-bit image to '" + path.string() + "'");
    }
    // PNG stores 16-bit samples big-endian.
    std::vector<png_byte> bytes(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bytes[2 * i] = static_cast<png_byte>(samples[i] >> 8);
        bytes[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xFF);
    }
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) {
        rows[y] = bytes.data() + y * width * 2;
    }
    write_png_rows(path, width, height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_pnm(const std::filesystem::path& path, const ImageBuffer& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw InvalidInput("PNM output needs 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace erase::io
