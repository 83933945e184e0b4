// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "erase/attention.hpp"
#include "erase/entropy.hpp"
#include "erase/image.hpp"
#include "erase/pipeline.hpp"

namespace erase {

enum class SceneFamily {
    FlatObjects,     ///< flat background, textured objects (low complexity)
    GradientGlyphs,  ///< smooth gradient, text-like glyph blocks (medium)
    DenseTexture,    ///< noise texture everywhere with glyph blocks (high)
};

std::string to_string(SceneFamily f);
SceneFamily scene_family_from_string(const std::string& s);

struct BenchSpec {
    std::size_t count = 30;
    std::vector<std::pair<std::size_t, std::size_t>> sizes = {{224, 224}, {280, 224}, {336, 280}};
    /// Relative weights of FlatObjects, GradientGlyphs, DenseTexture.
    std::array<double, 3> mix = {1.0, 1.0, 1.0};
    std::size_t patch_h = 28;
    std::size_t patch_w = 28;
    /// Minimum fraction of a patch a target must cover for the patch to be salient.
    double min_coverage = 0.1;
};

/// One generated scene. Targets are the objects a prompt would ask about and
/// define the salient patches; distractors are equally busy but irrelevant.
struct BenchItem {
    ImageBuffer image;
    PatchGeometry geometry;
    std::vector<bool> salient;
    SceneFamily family = SceneFamily::FlatObjects;
    std::uint64_t attention_seed = 0;

    std::size_t salient_count() const;
};

struct SyntheticBenchmark {
    BenchSpec spec;
    std::uint64_t seed = 0;
    std::vector<BenchItem> items;
};

/// Deterministic in (spec, seed). Each item has at least one salient patch.
SyntheticBenchmark generate_benchmark(const BenchSpec& spec, std::uint64_t seed);

/// Renders a single scene of the given family; exposed for tests and tools.
BenchItem generate_item(SceneFamily family,
                        std::size_t width,
                        std::size_t height,
                        const BenchSpec& spec,
                        std::uint64_t item_seed);

/// Salient recall |kept & salient| / |salient| of a selection over the item grid.
double salient_recall(const TokenSelection& kept, const BenchItem& item);

/// Recall of the final (stage-2) selection of a pipeline run.
double score(const PipelineResult& result, const BenchItem& item);

/// Synthetic attention whose queries favour the item's salient patches.
SyntheticAttentionConfig attention_config_for(const BenchItem& item, double relevance_gain = 1.0);

/// Writes item_NNNN.png files, masks.json (per-item salient indices) and
/// manifest.json (spec + seed) to `dir`.
void save_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

/// Loads a benchmark directory written by save_benchmark, or any directory
/// of images with a masks.json in the same schema.
SyntheticBenchmark load_benchmark(const std::filesystem::path& dir);

}  // namespace erase
