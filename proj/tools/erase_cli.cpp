// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// erase: command-line front end.
//   analyze   entropy map, heatmap and low/high-entropy masks
//   prune     stage-1 selection only
//   pipeline  both stages with synthetic or dumped attention, plus cost report
//   optimize  threshold/ratio search on a synthetic benchmark
//   report    resolution sweep, reference KV comparison, corpus statistics

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "erase/attention.hpp"
#include "erase/entropy.hpp"
#include "erase/error.hpp"
#include "erase/image.hpp"
#include "erase/image_io.hpp"
#include "erase/kv_model.hpp"
#include "erase/optimizer.hpp"
#include "erase/pipeline.hpp"
#include "erase/policy.hpp"
#include "erase/report.hpp"
#include "erase/serialize.hpp"
#include "erase/synth_bench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Bad flag values discovered after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PatchSize {
    std::size_t h = 0;
    std::size_t w = 0;
};

PatchSize parse_patch_size(const std::string& s) {
    static const std::regex re(R"((\d+)x(\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re)) {
        throw UsageError("--patch-size expects HxW, got '" + s + "'");
    }
    PatchSize p{std::stoul(m[1]), std::stoul(m[2])};
    if (p.h == 0 || p.w == 0) {
        throw UsageError("--patch-size must be positive");
    }
    return p;
}

erase::FinalBudget parse_k_final(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || !(v > 0.0)) {
        throw UsageError("--k-final expects a positive integer or a fraction in (0, 1), got '" + s + "'");
    }
    if (v < 1.0) {
        return erase::FinalBudget::fraction(v);
    }
    if (v != std::floor(v)) {
        throw UsageError("--k-final count must be an integer, got '" + s + "'");
    }
    return erase::FinalBudget::count(static_cast<std::size_t>(v));
}

struct AttnSource {
    enum class Kind { Synthetic, Dump } kind = Kind::Synthetic;
    std::uint64_t seed = 0;
    fs::path dir;
};

AttnSource parse_attn(const std::string& s, std::uint64_t default_seed) {
    AttnSource a;
    if (s == "synthetic") {
        a.seed = default_seed;
        return a;
    }
    if (s.rfind("synthetic:", 0) == 0) {
        const std::string v = s.substr(10);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("--attn synthetic:<seed> needs a nonnegative integer seed");
        }
        a.seed = std::stoull(v);
        return a;
    }
    if (s.rfind("dump:", 0) == 0 && s.size() > 5) {
        a.kind = AttnSource::Kind::Dump;
        a.dir = s.substr(5);
        return a;
    }
    throw UsageError("--attn expects synthetic:<seed> or dump:<dir>, got '" + s + "'");
}

erase::PadPolicy parse_pad(const std::string& s) {
    if (s == "edge") {
        return erase::PadPolicy::EdgeReplicate;
    }
    if (s == "reject") {
        return erase::PadPolicy::Reject;
    }
    throw UsageError("--pad expects edge or reject");
}

erase::PruningPolicy policy_with_overrides(const std::string& id_or_path,
                                           const std::string& patch_size,
                                           std::size_t bins) {
    erase::PruningPolicy p;
    try {
        p = erase::resolve_policy(id_or_path);
    } catch (const erase::LookupError& e) {
        throw UsageError(e.what());
    }
    if (!patch_size.empty()) {
        const auto ps = parse_patch_size(patch_size);
        p.patch_h = ps.h;
        p.patch_w = ps.w;
    }
    if (bins != 0) {
        p.bins = bins;
    }
    erase::ensure_valid(p);
    return p;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw erase::IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw erase::IoError("cannot write '" + path.string() + "'");
    }
}

erase::ImageBuffer mask_image(const std::vector<bool>& on, const erase::PatchGeometry& g) {
    erase::ImageBuffer m(g.cols, g.rows, 1, 0);
    for (std::size_t i = 0; i < on.size(); ++i) {
        m.data[i] = on[i] ? 255 : 0;
    }
    return m;
}

erase::ModelGeometry geometry_for(const erase::PruningPolicy& policy) {
    try {
        return erase::builtin_geometry(policy.model_id);
    } catch (const erase::LookupError&) {
        auto g = erase::builtin_geometry("qwen2.5-vl-7b");
        g.model_id = policy.model_id;
        g.num_layers = policy.total_layers;
        spdlog::warn("no decoder geometry for '{}'; using qwen2.5-vl-7b widths with {} layers", policy.model_id,
                     policy.total_layers);
        return g;
    }
}

std::string fixed(double v, int digits = 12) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string image;
    std::string patch_size = "28x28";
    std::size_t bins = erase::kDefaultBins;
    std::optional<double> split;
    std::string pad = "edge";
    std::string out = ".";
};

int cmd_analyze(const AnalyzeArgs& a) {
    const auto ps = parse_patch_size(a.patch_size);
    if (a.bins < 2) {
        throw UsageError("--bins must be at least 2");
    }
    const auto pad = parse_pad(a.pad);
    const auto img = erase::io::read_image(a.image);
    const auto gray = erase::to_luminance(img);
    const auto geom = erase::make_geometry(gray.width, gray.height, ps.h, ps.w, pad);
    const auto map = erase::compute_entropy_map(gray, geom, a.bins);
    const double split = a.split.value_or(map.global);

    const fs::path out(a.out);
    ensure_dir(out);
    json j = erase::to_json(map);
    j["image"] = a.image;
    j["split"] = split;
    erase::write_json(out / "entropy_map.json", j);
    erase::io::write_png_gray16(out / "entropy_heatmap.png", geom.cols, geom.rows, erase::entropy_heatmap(map));
    std::vector<bool> low(map.values.size());
    std::vector<bool> high(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        low[i] = map.values[i] <= split;
        high[i] = !low[i];
    }
    erase::io::write_png(out / "low_entropy_mask.png", mask_image(low, geom));
    erase::io::write_png(out / "high_entropy_mask.png", mask_image(high, geom));
    std::cout << "global_entropy " << fixed(map.global) << '\n';
    return 0;
}

struct PruneArgs {
    std::string image;
    std::string policy = "qwen2.5-vl-7b";
    std::string patch_size;
    std::size_t bins = 0;
    std::string pad = "edge";
    std::string out = ".";
};

int cmd_prune(const PruneArgs& a) {
    const auto policy = policy_with_overrides(a.policy, a.patch_size, a.bins);
    const auto pad = parse_pad(a.pad);
    const auto img = erase::io::read_image(a.image);
    const auto map = erase::entropy_for_policy(img, policy, pad);
    const auto decision = erase::classify(map.global, policy);
    const auto stage1 = erase::select_stage1(map, decision.stage1_retention);

    const fs::path out(a.out);
    ensure_dir(out);
    json j{{"decision", erase::to_json(decision)},
           {"stage1_count", stage1.kept.size()},
           {"original_count", stage1.original_count},
           {"global_entropy", map.global},
           {"kept_indices", stage1.kept},
           {"policy", policy.model_id},
           {"provenance", policy.provenance}};
    erase::write_json(out / "stage1.json", j);
    erase::io::write_png(out / "stage1_mask.png", erase::selection_mask(stage1, map.geometry));
    std::cout << "level " << decision.level << " kept " << stage1.kept.size() << "/" << stage1.original_count << '\n';
    return 0;
}

struct PipelineArgs {
    std::string image;
    std::string policy = "qwen2.5-vl-7b";
    std::string patch_size;
    std::size_t bins = 0;
    std::string k_final;
    std::string attn;
    std::string pad = "edge";
    std::size_t text_tokens = 0;
    std::uint64_t seed = 0;
    std::string out = ".";
};

int cmd_pipeline(const PipelineArgs& a) {
    auto policy = policy_with_overrides(a.policy, a.patch_size, a.bins);
    if (!a.k_final.empty()) {
        policy.final_budget = parse_k_final(a.k_final);
    }
    const auto source = parse_attn(a.attn, a.seed);
    const auto pad = parse_pad(a.pad);
    std::cout << "policy " << policy.model_id << " (" << policy.provenance << ")\n";

    std::unique_ptr<erase::AttentionProvider> provider;
    if (source.kind == AttnSource::Kind::Dump) {
        provider = std::make_unique<erase::FileAttentionProvider>(source.dir);
    } else {
        erase::SyntheticAttentionConfig cfg;
        cfg.seed = source.seed;
        provider = std::make_unique<erase::SyntheticAttentionProvider>(cfg);
    }

    const auto img = erase::io::read_image(a.image);
    erase::PipelineOptions opts;
    opts.pad = pad;
    const auto result = erase::run_pipeline(img, policy, *provider, opts);
    const auto geom = geometry_for(policy);
    const auto cost = erase::cost_report(geom, result.stage1.original_count, result.stage1.kept.size(),
                                         result.stage2.kept.size(), result.decision.stage2_layer, a.text_tokens,
                                         fs::path(a.image).filename().string());

    const fs::path out(a.out);
    ensure_dir(out);
    json j = erase::to_json(result);
    j["policy"] = policy.model_id;
    j["provenance"] = policy.provenance;
    erase::write_json(out / "result.json", j);
    erase::write_json(out / "cost_report.json", erase::to_json(cost));
    write_text(out / "cost_report.csv",
               erase::cost_report_csv_header() + "\n" + erase::cost_report_csv_row(cost) + "\n");
    erase::io::write_png(out / "stage1_mask.png", erase::selection_mask(result.stage1, result.entropy.geometry));
    erase::io::write_png(out / "stage2_mask.png", erase::selection_mask(result.stage2, result.entropy.geometry));

    std::cout << "level " << result.decision.level << " layer " << result.decision.stage2_layer << " stage1 "
              << result.stage1.kept.size() << " final " << result.stage2.kept.size() << "/"
              << result.stage1.original_count << (result.bypassed ? " bypassed" : "") << '\n';
    return 0;
}

struct OptimizeArgs {
    std::string bench;
    std::size_t bench_count = 30;
    std::size_t levels = 4;
    double alpha = 0.65;
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool random_baseline = false;
    std::string out = ".";
};

int cmd_optimize(const OptimizeArgs& a) {
    if (a.iterations < 10) {
        throw UsageError("--iterations must be at least 10, got " + std::to_string(a.iterations));
    }
    if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) {
        throw UsageError("--alpha must be in [0, 1]");
    }
    if (a.levels < 2) {
        throw UsageError("--levels must be at least 2");
    }
    erase::SyntheticBenchmark bench;
    if (!a.bench.empty()) {
        bench = erase::load_benchmark(a.bench);
    } else {
        erase::BenchSpec spec;
        spec.count = a.bench_count;
        bench = erase::generate_benchmark(spec, erase::hash_combine(a.seed, 0x42));
    }
    erase::SearchSpace space;
    space.num_levels = a.levels;
    erase::OptimizerOptions opts;
    opts.iterations = a.iterations;
    opts.seed = a.seed;
    opts.evaluation.alpha = a.alpha;
    opts.evaluation.workers = std::max<std::size_t>(a.workers, 1);
    spdlog::info("optimizing {} levels over {} items for {} iterations", a.levels, bench.items.size(), a.iterations);

    const auto r = erase::run_optimizer(space, bench, opts);
    const fs::path out(a.out);
    ensure_dir(out);
    write_text(out / "trace.csv", erase::trace_csv(r.trace));
    erase::write_json(out / "best_policy.json", erase::policy_to_json(r.policy_by_accuracy));
    erase::write_json(out / "best_objective_policy.json", erase::policy_to_json(r.policy_by_objective));

    const auto& best = r.trace[r.best_by_accuracy];
    json summary{{"iterations", a.iterations},
                 {"alpha", a.alpha},
                 {"seed", a.seed},
                 {"items", bench.items.size()},
                 {"best_by_accuracy", {{"iteration", best.iteration},
                                       {"accuracy", best.accuracy},
                                       {"efficiency_term", best.efficiency_term},
                                       {"objective", best.objective}}},
                 {"best_by_objective", {{"iteration", r.trace[r.best_by_objective].iteration},
                                        {"accuracy", r.trace[r.best_by_objective].accuracy},
                                        {"efficiency_term", r.trace[r.best_by_objective].efficiency_term},
                                        {"objective", r.trace[r.best_by_objective].objective}}},
                 {"best_objective", r.best_so_far.back()}};
    if (a.random_baseline) {
        const auto rnd = erase::run_random_search(space, bench, opts);
        write_text(out / "random_trace.csv", erase::trace_csv(rnd.trace));
        summary["random_best_objective"] = rnd.best_so_far.back();
    }
    erase::write_json(out / "summary.json", summary);

    std::cout << "best (by accuracy) iteration " << best.iteration << " accuracy " << fixed(best.accuracy, 6)
              << " efficiency " << fixed(best.efficiency_term, 6) << " objective " << fixed(best.objective, 6)
              << '\n';
    std::cout << "thresholds";
    for (const double t : best.candidate.thresholds) {
        std::cout << ' ' << fixed(t, 4);
    }
    std::cout << "\nprune_ratios";
    for (const double p : best.candidate.prune_ratios) {
        std::cout << ' ' << fixed(p, 4);
    }
    std::cout << '\n';
    return 0;
}

struct ReportArgs {
    std::vector<std::string> results;
    std::string policy = "qwen2.5-vl-7b";
    std::vector<std::size_t> sides;
    double aspect = 1.0;
    std::size_t text_tokens = 0;
    std::string out = ".";
};

std::vector<fs::path> expand_results(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file() && e.path().filename() == "result.json") {
                    found.push_back(e.path());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

int cmd_report(const ReportArgs& a) {
    const auto policy = policy_with_overrides(a.policy, "", 0);
    const auto geom = geometry_for(policy);
    erase::ScalingOptions so;
    if (!a.sides.empty()) {
        so.sides = a.sides;
    }
    so.aspect = a.aspect;
    so.text_tokens = a.text_tokens;
    so.stage1_prune_ratio = policy.prune_ratios.front();
    so.stage2_layer = policy.late_layer;
    const auto rows = erase::scaling_table(geom, policy, so);
    const auto ref = erase::reference_comparison(geom);

    const fs::path out(a.out);
    ensure_dir(out);
    write_text(out / "scaling.csv", erase::scaling_csv(rows));
    json scaling = json::array();
    for (const auto& r : rows) {
        scaling.push_back(erase::to_json(r));
    }
    json doc{{"model_id", geom.model_id}, {"scaling", scaling}, {"reference", erase::to_json(ref)}};

    const auto files = expand_results(a.results);
    if (!files.empty()) {
        std::vector<json> docs;
        for (const auto& f : files) {
            std::ifstream in(f);
            if (!in) {
                throw erase::IoError("cannot read result '" + f.string() + "'");
            }
            try {
                docs.push_back(json::parse(in));
            } catch (const json::parse_error& e) {
                throw erase::InvalidInput("'" + f.string() + "' is not JSON: " + e.what());
            }
        }
        const auto s = erase::summarize_results(docs);
        doc["corpus"] = erase::to_json(s);
        std::cout << "results " << s.count << " mean_stage1_prune_ratio " << fixed(s.mean_stage1_prune_ratio, 6)
                  << " mean_stage2_layer " << fixed(s.mean_stage2_layer, 6) << '\n';
    }
    erase::write_json(out / "report.json", doc);
    std::cout << "kv_base_mib " << fixed(ref.model_base_mib, 2) << " (published " << fixed(ref.reference_base_mib, 2)
              << ") kv_reduction " << fixed(ref.model_kv_reduction, 2) << " (published "
              << fixed(ref.reference_kv_reduction, 2) << ")\n";
    return 0;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("erase");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("ERASE_LOG")) {
        spdlog::cfg::helpers::load_levels(env);
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Entropy- and attention-guided vision token pruning toolkit"};
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    auto* sa = app.add_subcommand("analyze", "Patch entropy map, heatmap and low/high-entropy masks");
    sa->add_option("--image", analyze.image, "PNG or PPM/PGM image")->required();
    sa->add_option("--patch-size", analyze.patch_size, "Patch size HxW")->capture_default_str();
    sa->add_option("--bins", analyze.bins, "Histogram bins (2..256)")->capture_default_str();
    sa->add_option("--split", analyze.split, "Entropy split for the masks (default: global entropy)");
    sa->add_option("--pad", analyze.pad, "Partial patches: edge or reject")->capture_default_str();
    sa->add_option("--out", analyze.out, "Output directory")->capture_default_str();

    PruneArgs prune;
    auto* sp = app.add_subcommand("prune", "Stage-1 entropy pruning only");
    sp->add_option("--image", prune.image, "PNG or PPM/PGM image")->required();
    sp->add_option("--policy", prune.policy, "Built-in model id or policy JSON path")->capture_default_str();
    sp->add_option("--patch-size", prune.patch_size, "Override the policy patch size, HxW");
    sp->add_option("--bins", prune.bins, "Override the policy bin count");
    sp->add_option("--pad", prune.pad, "Partial patches: edge or reject")->capture_default_str();
    sp->add_option("--out", prune.out, "Output directory")->capture_default_str();

    PipelineArgs pipeline;
    auto* sq = app.add_subcommand("pipeline", "Two-stage pruning with KV eviction and cost report");
    sq->add_option("--image", pipeline.image, "PNG or PPM/PGM image")->required();
    sq->add_option("--policy", pipeline.policy, "Built-in model id or policy JSON path")->capture_default_str();
    sq->add_option("--patch-size", pipeline.patch_size, "Override the policy patch size, HxW");
    sq->add_option("--bins", pipeline.bins, "Override the policy bin count");
    sq->add_option("--k-final", pipeline.k_final, "Final budget: token count, or fraction in (0, 1)");
    sq->add_option("--attn", pipeline.attn, "synthetic:<seed> or dump:<dir>")->required();
    sq->add_option("--pad", pipeline.pad, "Partial patches: edge or reject")->capture_default_str();
    sq->add_option("--text-tokens", pipeline.text_tokens, "Prompt tokens for the cost report")->capture_default_str();
    sq->add_option("--seed", pipeline.seed, "Seed for a bare 'synthetic' attention source")->capture_default_str();
    sq->add_option("--out", pipeline.out, "Output directory")->capture_default_str();

    OptimizeArgs optimize;
    auto* so = app.add_subcommand("optimize", "Search thresholds and pruning ratios on a synthetic benchmark");
    so->add_option("--bench", optimize.bench, "Benchmark directory (default: generate one from --seed)");
    so->add_option("--bench-count", optimize.bench_count, "Items in a generated benchmark")->capture_default_str();
    so->add_option("--levels", optimize.levels, "Complexity levels")->capture_default_str();
    so->add_option("--alpha", optimize.alpha, "Accuracy weight of the objective")->capture_default_str();
    so->add_option("--iterations", optimize.iterations, "Evaluations (at least 10)")->capture_default_str();
    so->add_option("--seed", optimize.seed, "Seed for the benchmark and the search")->capture_default_str();
    so->add_option("--workers", optimize.workers, "Threads per evaluation")->capture_default_str();
    so->add_flag("--random-baseline", optimize.random_baseline, "Also run uniform random search");
    so->add_option("--out", optimize.out, "Output directory")->capture_default_str();

    ReportArgs report;
    auto* sr = app.add_subcommand("report", "Token/KV scaling tables and corpus statistics");
    sr->add_option("--results", report.results, "result.json files or directories holding them");
    sr->add_option("--policy", report.policy, "Built-in model id or policy JSON path")->capture_default_str();
    sr->add_option("--sides", report.sides, "Image widths to sweep (default 512..4096 step 512)");
    sr->add_option("--aspect", report.aspect, "Height / width")->capture_default_str();
    sr->add_option("--text-tokens", report.text_tokens, "Prompt tokens held in every layer")->capture_default_str();
    sr->add_option("--out", report.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*sa) {
            return cmd_analyze(analyze);
        }
        if (*sp) {
            return cmd_prune(prune);
        }
        if (*sq) {
            return cmd_pipeline(pipeline);
        }
        if (*so) {
            return cmd_optimize(optimize);
        }
        return cmd_report(report);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
