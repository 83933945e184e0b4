// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/attention.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <utility>

#include <nlohmann/json.hpp>

#include "erase/error.hpp"
#include "erase/rng.hpp"

namespace erase {

namespace {

using nlohmann::json;

constexpr std::size_t kNoToken = std::numeric_limits<std::size_t>::max();

void check_shapes(const AttentionInput& in) {
    if (in.num_heads == 0 || in.head_dim == 0) {
        throw InvalidInput("attention input needs num_heads >= 1 and head_dim >= 1");
    }
    if (in.text_tokens == 0) {
        throw InvalidInput("attention input has no text rows");
    }
    if (in.text_queries.size() != in.num_heads * in.text_tokens * in.head_dim) {
        throw InvalidInput("text_queries size " + std::to_string(in.text_queries.size()) + " != H*L*d = " +
                           std::to_string(in.num_heads * in.text_tokens * in.head_dim));
    }
    if (in.vision_keys.size() != in.num_heads * in.vision_tokens * in.head_dim) {
        throw InvalidInput("vision_keys size " + std::to_string(in.vision_keys.size()) + " != H*M*d = " +
                           std::to_string(in.num_heads * in.vision_tokens * in.head_dim));
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(in.text_queries.begin(), in.text_queries.end(), finite) ||
        !std::all_of(in.vision_keys.begin(), in.vision_keys.end(), finite)) {
        throw InvalidInput("attention operands contain non-finite values");
    }
}

std::uint64_t fold(std::uint64_t seed, int layer, char tag, std::size_t head, std::size_t row, std::size_t dim) {
    std::uint64_t h = mix64(seed);
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(layer)));
    h = hash_combine(h, static_cast<std::uint64_t>(tag));
    h = hash_combine(h, head);
    h = hash_combine(h, row);
    h = hash_combine(h, dim);
    return h;
}

double signed_unit(std::uint64_t seed, int layer, char tag, std::size_t head, std::size_t row, std::size_t dim) {
    return 2.0 * to_unit(fold(seed, layer, tag, head, row, dim)) - 1.0;
}

std::uintmax_t file_size_or_zero(const std::filesystem::path& p) {
    std::error_code ec;
    const auto n = std::filesystem::file_size(p, ec);
    return ec ? 0 : n;
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ProviderError("cannot open '" + path.string() + "'");
    }
    std::vector<unsigned char> raw(count * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw ProviderError("short read from '" + path.string() + "'");
    }
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

void write_f32(const std::filesystem::path& path, std::span<const float> values) {
    std::vector<unsigned char> raw(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        raw[4 * i] = static_cast<unsigned char>(bits & 0xFF);
        raw[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
        raw[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
        raw[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace

std::vector<double> attention_probabilities(const AttentionInput& input) {
    check_shapes(input);
    const std::size_t H = input.num_heads;
    const std::size_t L = input.text_tokens;
    const std::size_t M = input.vision_tokens;
    const std::size_t d = input.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<double> probs(H * L * M);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < L; ++i) {
            const double* q = input.text_queries.data() + (h * L + i) * d;
            double* row = probs.data() + (h * L + i) * M;
            for (std::size_t j = 0; j < M; ++j) {
                const double* k = input.vision_keys.data() + (h * M + j) * d;
                double dot = 0.0;
                for (std::size_t t = 0; t < d; ++t) {
                    dot += q[t] * k[t];
                }
                row[j] = dot * scale;
            }
            if (M == 0) {
                continue;
            }
            const double peak = *std::max_element(row, row + M);
            double total = 0.0;
            for (std::size_t j = 0; j < M; ++j) {
                row[j] = std::exp(row[j] - peak);
                total += row[j];
            }
            for (std::size_t j = 0; j < M; ++j) {
                row[j] /= total;
            }
        }
    }
    return probs;
}

RelevanceScores attention_scores(const AttentionInput& input) {
    RelevanceScores out;
    out.layer = input.layer;
    if (input.precomputed_scores) {
        const auto& s = *input.precomputed_scores;
        if (s.size() != input.vision_tokens) {
            throw InvalidInput("precomputed scores length " + std::to_string(s.size()) + " != vision tokens " +
                               std::to_string(input.vision_tokens));
        }
        if (!std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) {
            throw InvalidInput("precomputed scores contain non-finite values");
        }
        out.values = s;
        return out;
    }
    const auto probs = attention_probabilities(input);
    const std::size_t H = input.num_heads;
    const std::size_t L = input.text_tokens;
    const std::size_t M = input.vision_tokens;
    out.values.assign(M, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < M; ++j) {
            double head_sum = 0.0;
            for (std::size_t h = 0; h < H; ++h) {
                head_sum += probs[(h * L + i) * M + j];
            }
            out.values[j] += head_sum / static_cast<double>(H);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic provider

SyntheticAttentionProvider::SyntheticAttentionProvider(SyntheticAttentionConfig config) : m_config(std::move(config)) {
    if (m_config.num_heads == 0 || m_config.head_dim == 0 || m_config.text_tokens == 0) {
        throw InvalidInput("synthetic attention needs nonzero heads, head_dim and text tokens");
    }
    if (!std::isfinite(m_config.relevance_gain)) {
        throw InvalidInput("synthetic attention relevance_gain must be finite");
    }
}

AttentionInput SyntheticAttentionProvider::build(int layer,
                                                 std::span<const std::size_t> patch_indices,
                                                 std::size_t original_count) const {
    const auto& cfg = m_config;
    if (!cfg.relevance.empty() && cfg.relevance.size() != original_count) {
        throw ProviderError("synthetic relevance covers " + std::to_string(cfg.relevance.size()) +
                            " patches, grid has " + std::to_string(original_count));
    }
    AttentionInput in;
    in.layer = layer;
    in.num_heads = cfg.num_heads;
    in.head_dim = cfg.head_dim;
    in.text_tokens = cfg.text_tokens;
    in.vision_tokens = patch_indices.size();
    in.text_queries.resize(cfg.num_heads * cfg.text_tokens * cfg.head_dim);
    in.vision_keys.resize(cfg.num_heads * patch_indices.size() * cfg.head_dim);

    std::vector<double> topic(cfg.head_dim);
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
        for (std::size_t t = 0; t < cfg.head_dim; ++t) {
            topic[t] = signed_unit(cfg.seed, layer, 'T', h, 0, t);
        }
        for (std::size_t i = 0; i < cfg.text_tokens; ++i) {
            double* q = in.text_queries.data() + (h * cfg.text_tokens + i) * cfg.head_dim;
            for (std::size_t t = 0; t < cfg.head_dim; ++t) {
                q[t] = signed_unit(cfg.seed, layer, 'Q', h, i, t) + topic[t];
            }
        }
        for (std::size_t j = 0; j < patch_indices.size(); ++j) {
            const std::size_t p = patch_indices[j];
            if (p >= original_count) {
                throw ProviderError("patch index " + std::to_string(p) + " outside grid of " +
                                    std::to_string(original_count));
            }
            const double pull = cfg.relevance.empty() ? 0.0 : cfg.relevance_gain * cfg.relevance[p];
            double* k = in.vision_keys.data() + (h * patch_indices.size() + j) * cfg.head_dim;
            for (std::size_t t = 0; t < cfg.head_dim; ++t) {
                k[t] = signed_unit(cfg.seed, layer, 'K', h, p, t) + pull * topic[t];
            }
        }
    }
    return in;
}

AttentionInput SyntheticAttentionProvider::fetch(int layer,
                                                 std::span<const std::size_t> patch_indices,
                                                 std::size_t original_count) {
    count_call();
    return build(layer, patch_indices, original_count);
}

AttentionInput SyntheticAttentionProvider::full_layer(int layer, std::size_t original_count) const {
    std::vector<std::size_t> all(original_count);
    for (std::size_t i = 0; i < original_count; ++i) {
        all[i] = i;
    }
    return build(layer, all, original_count);
}

// ---------------------------------------------------------------------------
// Attention dumps

AttentionDumpManifest read_dump_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) {
        throw ProviderError("cannot open attention dump manifest '" + path.string() + "'");
    }
    AttentionDumpManifest m;
    try {
        const json j = json::parse(in);
        m.format_version = j.at("format_version").get<int>();
        m.model_id = j.at("model_id").get<std::string>();
        m.num_layers = j.at("num_layers").get<int>();
        m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        m.num_heads = j.at("num_heads").get<std::size_t>();
        m.head_dim = j.at("head_dim").get<std::size_t>();
        m.num_text_tokens = j.at("num_text_tokens").get<std::size_t>();
        m.num_vision_tokens = j.at("num_vision_tokens").get<std::size_t>();
        m.vision_token_patch_indices = j.at("vision_token_patch_indices").get<std::vector<std::size_t>>();
        for (const auto& l : j.at("layers")) {
            m.layers.push_back({l.at("index").get<int>(), l.at("q_file").get<std::string>(),
                                l.at("k_file").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ProviderError("malformed attention dump manifest '" + path.string() + "': " + e.what());
    }
    return m;
}

std::vector<std::string> check_attention_dump(const std::filesystem::path& dir) {
    std::vector<std::string> issues;
    AttentionDumpManifest m;
    try {
        m = read_dump_manifest(dir);
    } catch (const Error& e) {
        issues.emplace_back(e.what());
        return issues;
    }
    if (m.format_version != 1) {
        issues.push_back("unsupported format_version " + std::to_string(m.format_version));
    }
    if (m.num_heads == 0 || m.head_dim == 0 || m.num_text_tokens == 0) {
        issues.emplace_back("num_heads, head_dim and num_text_tokens must be positive");
    }
    if (m.vision_token_patch_indices.size() != m.num_vision_tokens) {
        issues.push_back("vision_token_patch_indices has " + std::to_string(m.vision_token_patch_indices.size()) +
                         " entries, expected num_vision_tokens = " + std::to_string(m.num_vision_tokens));
    }
    std::vector<bool> seen(m.num_vision_tokens, false);
    for (const std::size_t p : m.vision_token_patch_indices) {
        if (p >= m.num_vision_tokens || seen[p]) {
            issues.push_back("vision_token_patch_indices is not a permutation of [0, num_vision_tokens)");
            break;
        }
        seen[p] = true;
    }
    const std::uintmax_t q_bytes = 4ull * m.num_heads * m.num_text_tokens * m.head_dim;
    const std::uintmax_t k_bytes = 4ull * m.num_heads * m.num_vision_tokens * m.head_dim;
    for (const auto& layer : m.layers) {
        if (layer.index < 1 || layer.index > m.num_layers) {
            issues.push_back("layer index " + std::to_string(layer.index) + " outside [1, " +
                             std::to_string(m.num_layers) + "]");
        }
        for (const auto& [file, expected, rows] :
             {std::tuple{layer.q_file, q_bytes, m.num_text_tokens}, std::tuple{layer.k_file, k_bytes, m.num_vision_tokens}}) {
            const auto path = dir / file;
            const auto actual = file_size_or_zero(path);
            if (actual != expected) {
                issues.push_back("size of '" + file + "' is " + std::to_string(actual) + " bytes, expected " +
                                 std::to_string(expected));
                continue;
            }
            const auto values = read_f32(path, m.num_heads * rows * m.head_dim);
            if (!std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); })) {
                issues.push_back("non-finite values in '" + file + "'");
            }
        }
    }
    return issues;
}

void write_attention_dump(const std::filesystem::path& dir,
                          const AttentionDumpManifest& manifest,
                          std::span<const std::vector<float>> queries,
                          std::span<const std::vector<float>> keys) {
    if (queries.size() != manifest.layers.size() || keys.size() != manifest.layers.size()) {
        throw InvalidInput("one query and one key matrix required per manifest layer");
    }
    std::filesystem::create_directories(dir);
    json layers = json::array();
    for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
        const auto& l = manifest.layers[i];
        write_f32(dir / l.q_file, queries[i]);
        write_f32(dir / l.k_file, keys[i]);
        layers.push_back({{"index", l.index}, {"q_file", l.q_file}, {"k_file", l.k_file}});
    }
    const json j = {
        {"format_version", manifest.format_version},
        {"model_id", manifest.model_id},
        {"num_layers", manifest.num_layers},
        {"hidden_dim", manifest.hidden_dim},
        {"num_heads", manifest.num_heads},
        {"head_dim", manifest.head_dim},
        {"num_text_tokens", manifest.num_text_tokens},
        {"num_vision_tokens", manifest.num_vision_tokens},
        {"vision_token_patch_indices", manifest.vision_token_patch_indices},
        {"layers", layers},
    };
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing '" + (dir / "manifest.json").string() + "'");
    }
}

FileAttentionProvider::FileAttentionProvider(std::filesystem::path dir) : m_dir(std::move(dir)) {
    const auto issues = check_attention_dump(m_dir);
    if (!issues.empty()) {
        std::string msg = "invalid attention dump '" + m_dir.string() + "'";
        for (const auto& issue : issues) {
            msg += "; " + issue;
        }
        throw ProviderError(msg);
    }
    m_manifest = read_dump_manifest(m_dir);
    m_grid_size = m_manifest.num_vision_tokens;
    m_token_of_patch.assign(m_grid_size, kNoToken);
    for (std::size_t t = 0; t < m_manifest.vision_token_patch_indices.size(); ++t) {
        m_token_of_patch[m_manifest.vision_token_patch_indices[t]] = t;
    }
}

AttentionInput FileAttentionProvider::fetch(int layer,
                                            std::span<const std::size_t> patch_indices,
                                            std::size_t original_count) {
    count_call();
    if (original_count != m_grid_size) {
        throw ProviderError("attention dump covers " + std::to_string(m_grid_size) +
                            " vision tokens but the patch grid has " + std::to_string(original_count));
    }
    const auto it = std::find_if(m_manifest.layers.begin(), m_manifest.layers.end(),
                                 [&](const AttentionDumpLayer& l) { return l.index == layer; });
    if (it == m_manifest.layers.end()) {
        std::string have;
        for (const auto& l : m_manifest.layers) {
            have += (have.empty() ? "" : ", ") + std::to_string(l.index);
        }
        throw ProviderError("attention dump '" + m_dir.string() + "' has no layer " + std::to_string(layer) +
                            " (available: " + have + ")");
    }
    const auto& m = m_manifest;
    const std::size_t H = m.num_heads;
    const std::size_t d = m.head_dim;
    const std::size_t L = m.num_text_tokens;
    const auto q = read_f32(m_dir / it->q_file, H * L * d);
    const auto k = read_f32(m_dir / it->k_file, H * m.num_vision_tokens * d);

    AttentionInput in;
    in.layer = layer;
    in.num_heads = H;
    in.head_dim = d;
    in.text_tokens = L;
    in.vision_tokens = patch_indices.size();
    in.text_queries.assign(q.begin(), q.end());
    in.vision_keys.resize(H * patch_indices.size() * d);
    for (std::size_t j = 0; j < patch_indices.size(); ++j) {
        const std::size_t p = patch_indices[j];
        if (p >= m_grid_size || m_token_of_patch[p] == kNoToken) {
            throw ProviderError("patch " + std::to_string(p) + " has no vision token in the dump");
        }
        const std::size_t token = m_token_of_patch[p];
        for (std::size_t h = 0; h < H; ++h) {
            const float* src = k.data() + (h * m.num_vision_tokens + token) * d;
            std::copy(src, src + d, in.vision_keys.begin() + static_cast<std::ptrdiff_t>((h * patch_indices.size() + j) * d));
        }
    }
    return in;
}

}  // namespace erase
