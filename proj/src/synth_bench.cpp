// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/synth_bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "erase/error.hpp"
#include "erase/image_io.hpp"
#include "erase/rng.hpp"

namespace erase {

namespace {

using nlohmann::json;

struct Rect {
    std::size_t x = 0;
    std::size_t y = 0;
    std::size_t w = 0;
    std::size_t h = 0;

    bool overlaps(const Rect& o, std::size_t margin) const {
        return x < o.x + o.w + margin && o.x < x + w + margin && y < o.y + o.h + margin && o.y < y + h + margin;
    }
};

class Canvas {
public:
    Canvas(std::size_t w, std::size_t h) : img(w, h, 1), target(w * h, false) {}

    void set(std::size_t x, std::size_t y, int v) {
        img.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    void mark(const Rect& r) {
        for (std::size_t y = r.y; y < r.y + r.h; ++y) {
            for (std::size_t x = r.x; x < r.x + r.w; ++x) {
                target[y * img.width + x] = true;
            }
        }
    }

    ImageBuffer img;
    std::vector<bool> target;
};

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Places a w x h box inside the canvas, avoiding earlier boxes when possible.
Rect place(Rng& rng, std::size_t W, std::size_t H, std::size_t w, std::size_t h, const std::vector<Rect>& taken) {
    w = std::min(w, W);
    h = std::min(h, H);
    Rect r{0, 0, w, h};
    for (int attempt = 0; attempt < 64; ++attempt) {
        r.x = rng.below(W - w + 1);
        r.y = rng.below(H - h + 1);
        if (std::none_of(taken.begin(), taken.end(), [&](const Rect& o) { return r.overlaps(o, 4); })) {
            break;
        }
    }
    return r;
}

void draw_noise_rect(Canvas& c, Rng& rng, const Rect& r, int lo, int hi) {
    for (std::size_t y = r.y; y < r.y + r.h; ++y) {
        for (std::size_t x = r.x; x < r.x + r.w; ++x) {
            c.set(x, y, uniform_int(rng, lo, hi));
        }
    }
}

// A "word" of 5x7-cell pseudo characters scaled 3x, inked with noisy dark values.
Rect draw_word(Canvas& c, Rng& rng, std::vector<Rect>& taken, int ink_lo, int ink_hi) {
    constexpr std::size_t kScale = 3;
    constexpr std::size_t kCharW = 5 * kScale;
    constexpr std::size_t kCharH = 7 * kScale;
    constexpr std::size_t kGap = kScale;
    const std::size_t chars = 2 + rng.below(3);
    const std::size_t width = chars * kCharW + (chars - 1) * kGap;
    const Rect box = place(rng, c.img.width, c.img.height, width, kCharH, taken);
    taken.push_back(box);
    for (std::size_t ch = 0; ch < chars; ++ch) {
        std::array<bool, 35> cells{};
        for (auto& cell : cells) {
            cell = rng.uniform() < 0.5;
        }
        cells[17] = true;
        for (std::size_t cy = 0; cy < 7; ++cy) {
            for (std::size_t cx = 0; cx < 5; ++cx) {
                if (!cells[cy * 5 + cx]) {
                    continue;
                }
                for (std::size_t py = 0; py < kScale; ++py) {
                    for (std::size_t px = 0; px < kScale; ++px) {
                        const std::size_t x = box.x + ch * (kCharW + kGap) + cx * kScale + px;
                        const std::size_t y = box.y + cy * kScale + py;
                        if (x < box.x + box.w && y < box.y + box.h) {
                            c.set(x, y, uniform_int(rng, ink_lo, ink_hi));
                        }
                    }
                }
            }
        }
    }
    return box;
}

std::vector<bool> salient_patches(const Canvas& c, const PatchGeometry& g, double min_coverage) {
    const std::size_t W = c.img.width;
    const std::size_t H = c.img.height;
    std::vector<double> coverage(g.token_count(), 0.0);
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t col = 0; col < g.cols; ++col) {
            std::size_t hits = 0;
            for (std::size_t y = r * g.patch_h; y < std::min(H, (r + 1) * g.patch_h); ++y) {
                for (std::size_t x = col * g.patch_w; x < std::min(W, (col + 1) * g.patch_w); ++x) {
                    hits += c.target[y * W + x] ? 1 : 0;
                }
            }
            coverage[r * g.cols + col] = static_cast<double>(hits) / static_cast<double>(g.patch_h * g.patch_w);
        }
    }
    std::vector<bool> salient(coverage.size());
    for (std::size_t i = 0; i < coverage.size(); ++i) {
        salient[i] = coverage[i] >= min_coverage;
    }
    if (std::none_of(salient.begin(), salient.end(), [](bool b) { return b; })) {
        salient[static_cast<std::size_t>(std::max_element(coverage.begin(), coverage.end()) - coverage.begin())] = true;
    }
    return salient;
}

}  // namespace

std::string to_string(SceneFamily f) {
    switch (f) {
        case SceneFamily::FlatObjects:
            return "flat-objects";
        case SceneFamily::GradientGlyphs:
            return "gradient-glyphs";
        case SceneFamily::DenseTexture:
            return "dense-texture";
    }
    return "unknown";
}

SceneFamily scene_family_from_string(const std::string& s) {
    for (const auto f : {SceneFamily::FlatObjects, SceneFamily::GradientGlyphs, SceneFamily::DenseTexture}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw InvalidInput("unknown scene family '" + s + "'");
}

std::size_t BenchItem::salient_count() const {
    return static_cast<std::size_t>(std::count(salient.begin(), salient.end(), true));
}

BenchItem generate_item(SceneFamily family,
                        std::size_t width,
                        std::size_t height,
                        const BenchSpec& spec,
                        std::uint64_t item_seed) {
    if (width < 32 || height < 32) {
        throw InvalidInput("synthetic scenes need at least 32x32 pixels");
    }
    Rng rng(item_seed);
    Canvas canvas(width, height);
    std::vector<Rect> taken;
    const auto patch = static_cast<double>(std::max(spec.patch_h, spec.patch_w));

    switch (family) {
        case SceneFamily::FlatObjects: {
            const int bg = uniform_int(rng, 40, 215);
            std::fill(canvas.img.data.begin(), canvas.img.data.end(), static_cast<std::uint8_t>(bg));
            const std::size_t targets = 1 + rng.below(2);
            const std::size_t distractors = 1 + rng.below(2);
            for (std::size_t i = 0; i < targets + distractors; ++i) {
                const auto w = static_cast<std::size_t>(patch * rng.uniform(0.9, 1.8));
                const auto h = static_cast<std::size_t>(patch * rng.uniform(0.9, 1.8));
                const Rect r = place(rng, width, height, w, h, taken);
                taken.push_back(r);
                const int lo = uniform_int(rng, 0, 150);
                draw_noise_rect(canvas, rng, r, lo, lo + uniform_int(rng, 60, 105));
                if (i < targets) {
                    canvas.mark(r);
                }
            }
            break;
        }
        case SceneFamily::GradientGlyphs: {
            const double base = rng.uniform(90.0, 140.0);
            const double gx = rng.uniform(-60.0, 60.0);
            const double gy = rng.uniform(-60.0, 60.0);
            for (std::size_t y = 0; y < height; ++y) {
                for (std::size_t x = 0; x < width; ++x) {
                    const double v = base + gx * static_cast<double>(x) / static_cast<double>(width) +
                                     gy * static_cast<double>(y) / static_cast<double>(height);
                    canvas.set(x, y, static_cast<int>(std::lround(v)));
                }
            }
            const std::size_t targets = 1 + rng.below(2);
            const std::size_t distractors = 3 + rng.below(3);
            for (std::size_t i = 0; i < targets + distractors; ++i) {
                const Rect box = draw_word(canvas, rng, taken, 0, 50);
                if (i < targets) {
                    canvas.mark(box);
                }
            }
            break;
        }
        case SceneFamily::DenseTexture: {
            const int range = uniform_int(rng, 160, 220);
            const int lo = uniform_int(rng, 0, 255 - range);
            draw_noise_rect(canvas, rng, Rect{0, 0, width, height}, lo, lo + range);
            const std::size_t targets = 1 + rng.below(2);
            const std::size_t distractors = 4 + rng.below(4);
            for (std::size_t i = 0; i < targets + distractors; ++i) {
                const Rect box = draw_word(canvas, rng, taken, 0, 80);
                if (i < targets) {
                    canvas.mark(box);
                }
            }
            break;
        }
    }

    BenchItem item;
    item.family = family;
    item.geometry = make_geometry(width, height, spec.patch_h, spec.patch_w);
    item.salient = salient_patches(canvas, item.geometry, spec.min_coverage);
    item.image = std::move(canvas.img);
    item.attention_seed = hash_combine(item_seed, 0x41);
    return item;
}

SyntheticBenchmark generate_benchmark(const BenchSpec& spec, std::uint64_t seed) {
    if (spec.count == 0) {
        throw InvalidInput("benchmark count must be >= 1");
    }
    if (spec.sizes.empty()) {
        throw InvalidInput("benchmark needs at least one image size");
    }
    const double total = spec.mix[0] + spec.mix[1] + spec.mix[2];
    if (!(total > 0.0) || std::any_of(spec.mix.begin(), spec.mix.end(), [](double w) { return w < 0.0; })) {
        throw InvalidInput("scene mix weights must be nonnegative with a positive sum");
    }
    SyntheticBenchmark bench;
    bench.spec = spec;
    bench.seed = seed;
    bench.items.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const std::uint64_t item_seed = hash_combine(seed, i);
        Rng pick(hash_combine(item_seed, 0x46));
        const double u = pick.uniform() * total;
        SceneFamily family = SceneFamily::DenseTexture;
        if (u < spec.mix[0]) {
            family = SceneFamily::FlatObjects;
        } else if (u < spec.mix[0] + spec.mix[1]) {
            family = SceneFamily::GradientGlyphs;
        }
        const auto [w, h] = spec.sizes[pick.below(spec.sizes.size())];
        bench.items.push_back(generate_item(family, w, h, spec, item_seed));
    }
    return bench;
}

double salient_recall(const TokenSelection& kept, const BenchItem& item) {
    if (kept.original_count != item.salient.size()) {
        throw InvalidInput("selection over " + std::to_string(kept.original_count) + " tokens does not match item grid of " +
                           std::to_string(item.salient.size()));
    }
    const std::size_t total = item.salient_count();
    if (total == 0) {
        throw InvalidInput("item has no salient patches");
    }
    std::size_t hit = 0;
    for (const std::size_t i : kept.kept) {
        if (i >= item.salient.size()) {
            throw InvalidInput("selection index outside item grid");
        }
        hit += item.salient[i] ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

double score(const PipelineResult& result, const BenchItem& item) {
    return salient_recall(result.stage2, item);
}

SyntheticAttentionConfig attention_config_for(const BenchItem& item, double relevance_gain) {
    SyntheticAttentionConfig cfg;
    cfg.seed = item.attention_seed;
    cfg.relevance.resize(item.salient.size());
    for (std::size_t i = 0; i < item.salient.size(); ++i) {
        cfg.relevance[i] = item.salient[i] ? 1.0 : 0.0;
    }
    cfg.relevance_gain = relevance_gain;
    return cfg;
}

void save_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json items = json::array();
    for (std::size_t i = 0; i < bench.items.size(); ++i) {
        const auto& item = bench.items[i];
        char name[32];
        std::snprintf(name, sizeof(name), "item_%04zu.png", i);
        io::write_png(dir / name, item.image);
        std::vector<std::size_t> salient;
        for (std::size_t p = 0; p < item.salient.size(); ++p) {
            if (item.salient[p]) {
                salient.push_back(p);
            }
        }
        items.push_back({{"file", name},
                         {"family", to_string(item.family)},
                         {"width", item.image.width},
                         {"height", item.image.height},
                         {"patch_h", item.geometry.patch_h},
                         {"patch_w", item.geometry.patch_w},
                         {"attention_seed", item.attention_seed},
                         {"salient", salient}});
    }
    json sizes = json::array();
    for (const auto& [w, h] : bench.spec.sizes) {
        sizes.push_back({w, h});
    }
    const json manifest = {{"seed", bench.seed},
                           {"spec",
                            {{"count", bench.spec.count},
                             {"sizes", sizes},
                             {"mix", bench.spec.mix},
                             {"patch_h", bench.spec.patch_h},
                             {"patch_w", bench.spec.patch_w},
                             {"min_coverage", bench.spec.min_coverage}}}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    std::ofstream(dir / "masks.json") << json{{"items", items}}.dump(2) << '\n';
}

SyntheticBenchmark load_benchmark(const std::filesystem::path& dir) {
    std::ifstream in(dir / "masks.json");
    if (!in) {
        throw IoError("cannot open '" + (dir / "masks.json").string() + "'");
    }
    SyntheticBenchmark bench;
    try {
        const json masks = json::parse(in);
        std::ifstream min(dir / "manifest.json");
        if (min) {
            const json m = json::parse(min);
            bench.seed = m.value("seed", std::uint64_t{0});
            const auto& s = m.at("spec");
            bench.spec.count = s.at("count").get<std::size_t>();
            bench.spec.sizes.clear();
            for (const auto& wh : s.at("sizes")) {
                bench.spec.sizes.emplace_back(wh.at(0).get<std::size_t>(), wh.at(1).get<std::size_t>());
            }
            bench.spec.mix = s.at("mix").get<std::array<double, 3>>();
            bench.spec.patch_h = s.at("patch_h").get<std::size_t>();
            bench.spec.patch_w = s.at("patch_w").get<std::size_t>();
            bench.spec.min_coverage = s.at("min_coverage").get<double>();
        }
        for (const auto& j : masks.at("items")) {
            BenchItem item;
            item.image = io::read_image(dir / j.at("file").get<std::string>());
            item.family = scene_family_from_string(j.value("family", std::string("flat-objects")));
            item.geometry = make_geometry(item.image.width, item.image.height, j.at("patch_h").get<std::size_t>(),
                                          j.at("patch_w").get<std::size_t>());
            item.attention_seed = j.value("attention_seed", std::uint64_t{0});
            item.salient.assign(item.geometry.token_count(), false);
            for (const auto p : j.at("salient").get<std::vector<std::size_t>>()) {
                if (p >= item.salient.size()) {
                    throw InvalidInput("salient index " + std::to_string(p) + " outside grid in masks.json");
                }
                item.salient[p] = true;
            }
            if (item.salient_count() == 0) {
                throw InvalidInput("item '" + j.at("file").get<std::string>() + "' has no salient patch");
            }
            bench.items.push_back(std::move(item));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("malformed benchmark metadata in '" + dir.string() + "': " + e.what());
    }
    bench.spec.count = bench.items.size();
    return bench;
}

}  // namespace erase
