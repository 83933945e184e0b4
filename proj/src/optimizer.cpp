// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "erase/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include "erase/error.hpp"
#include "erase/pipeline.hpp"

namespace erase {

// ---------------------------------------------------------------------------
// Kernel and acquisition

double matern52(double r) {
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double expected_improvement(double mean, double stddev, double best, double xi) {
    const double gain = mean - best - xi;
    if (!(stddev > 1e-12)) {
        return std::max(gain, 0.0);
    }
    const double z = gain / stddev;
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
    return gain * cdf + stddev * pdf;
}

std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < dim; ++k) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.below(i)]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            pts[i][k] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Gaussian process

struct GaussianProcess::Impl {
    Eigen::MatrixXd x;  // n x d
    Eigen::VectorXd y;  // standardized
    double y_mean = 0.0;
    double y_scale = 1.0;
    std::vector<double> ls;
    double noise = 1e-6;
    double signal = 1.0;  // profiled variance of standardized targets
    double lml = -std::numeric_limits<double>::infinity();
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;

    Eigen::MatrixXd correlation(const std::vector<double>& scales) const {
        const auto n = x.rows();
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i, i) = 1.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                double r2 = 0.0;
                for (Eigen::Index t = 0; t < x.cols(); ++t) {
                    const double d = (x(i, t) - x(j, t)) / scales[static_cast<std::size_t>(t)];
                    r2 += d * d;
                }
                k(i, j) = k(j, i) = matern52(std::sqrt(r2));
            }
        }
        return k;
    }

    // Profiled log marginal likelihood; -inf if the matrix is not PD.
    double score(const Eigen::MatrixXd& corr, double eta) const {
        const auto n = static_cast<double>(x.rows());
        Eigen::MatrixXd k = corr;
        k.diagonal().array() += eta;
        Eigen::LLT<Eigen::MatrixXd> chol(k);
        if (chol.info() != Eigen::Success) {
            return -std::numeric_limits<double>::infinity();
        }
        const Eigen::VectorXd a = chol.solve(y);
        const double quad = std::max(y.dot(a), 1e-300);
        const double logdet = 2.0 * chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return -0.5 * n * std::log(quad / n) - 0.5 * logdet;
    }
};

GaussianProcess::GaussianProcess() : m_impl(std::make_unique<Impl>()) {}
GaussianProcess::~GaussianProcess() = default;
GaussianProcess::GaussianProcess(GaussianProcess&&) noexcept = default;
GaussianProcess& GaussianProcess::operator=(GaussianProcess&&) noexcept = default;

bool GaussianProcess::fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
    if (xs.empty() || xs.size() != ys.size()) {
        throw InvalidInput("GaussianProcess::fit needs matching, nonempty inputs");
    }
    auto& m = *m_impl;
    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto d = static_cast<Eigen::Index>(xs.front().size());
    m.x.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index t = 0; t < d; ++t) {
            m.x(i, t) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
        }
    }
    m.y_mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double var = 0.0;
    for (const double v : ys) {
        var += (v - m.y_mean) * (v - m.y_mean);
    }
    var /= static_cast<double>(ys.size());
    m.y_scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    m.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m.y(i) = (ys[static_cast<std::size_t>(i)] - m.y_mean) / m.y_scale;
    }

    static constexpr std::array<double, 5> kNoise = {1e-6, 1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) {
        grid.push_back(std::exp(std::log(0.03) + (std::log(3.0) - std::log(0.03)) * i / 11.0));
    }

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_ls(static_cast<std::size_t>(d), 0.3);
    double best_noise = 1e-6;
    // Shared length-scale first, then one coordinate sweep per dimension.
    for (const double l : grid) {
        const std::vector<double> scales(static_cast<std::size_t>(d), l);
        const Eigen::MatrixXd corr = m.correlation(scales);
        for (const double eta : kNoise) {
            const double s = m.score(corr, eta);
            if (s > best) {
                best = s;
                best_ls = scales;
                best_noise = eta;
            }
        }
    }
    if (!std::isfinite(best)) {
        return false;
    }
    if (d > 1) {
        for (std::size_t t = 0; t < static_cast<std::size_t>(d); ++t) {
            for (const double l : grid) {
                if (l == best_ls[t]) {
                    continue;
                }
                auto scales = best_ls;
                scales[t] = l;
                const double s = m.score(m.correlation(scales), best_noise);
                if (s > best) {
                    best = s;
                    best_ls = scales;
                }
            }
        }
    }

    m.ls = best_ls;
    m.noise = best_noise;
    m.lml = best;
    Eigen::MatrixXd k = m.correlation(m.ls);
    k.diagonal().array() += m.noise;
    m.llt.compute(k);
    if (m.llt.info() != Eigen::Success) {
        return false;
    }
    m.alpha = m.llt.solve(m.y);
    m.signal = std::max(m.y.dot(m.alpha) / static_cast<double>(n), 1e-12);
    return true;
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> x) const {
    const auto& m = *m_impl;
    const auto n = m.x.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double r2 = 0.0;
        for (Eigen::Index t = 0; t < m.x.cols(); ++t) {
            const double d = (m.x(i, t) - x[static_cast<std::size_t>(t)]) / m.ls[static_cast<std::size_t>(t)];
            r2 += d * d;
        }
        k(i) = matern52(std::sqrt(r2));
    }
    const Eigen::VectorXd v = m.llt.matrixL().solve(k);
    const double var = m.signal * std::max(1.0 - v.squaredNorm(), 0.0);
    return {m.y_mean + m.y_scale * k.dot(m.alpha), m.y_scale * std::sqrt(var)};
}

std::vector<double> GaussianProcess::length_scales() const { return m_impl->ls; }
double GaussianProcess::noise_ratio() const { return m_impl->noise; }
double GaussianProcess::log_marginal_likelihood() const { return m_impl->lml; }

// ---------------------------------------------------------------------------
// Ask/tell loop

BayesianOptimizer::BayesianOptimizer(std::size_t dim, BayesOptConfig config, RepairFn repair)
    : m_dim(dim), m_config(config), m_repair(std::move(repair)), m_rng(config.seed) {
    if (dim == 0) {
        throw InvalidInput("optimizer dimension must be >= 1");
    }
    if (m_config.initial_points < 5) {
        throw InvalidInput("at least 5 initial design points are required");
    }
    if (m_config.candidate_pool == 0) {
        throw InvalidInput("candidate pool must be nonempty");
    }
    m_design = latin_hypercube(m_config.initial_points, m_dim, m_rng);
    for (auto& p : m_design) {
        if (m_repair) {
            m_repair(p);
        }
    }
}

std::vector<double> BayesianOptimizer::uniform_point() {
    std::vector<double> p(m_dim);
    for (auto& v : p) {
        v = m_rng.uniform();
    }
    if (m_repair) {
        m_repair(p);
    }
    return p;
}

std::vector<double> BayesianOptimizer::propose() {
    m_last_surrogate = false;
    if (m_xs.size() < m_design.size()) {
        return m_design[m_xs.size()];
    }

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < m_xs.size(); ++i) {
        if (std::isfinite(m_ys[i])) {
            xs.push_back(m_xs[i]);
            ys.push_back(m_ys[i]);
        }
    }
    GaussianProcess gp;
    if (xs.size() < 2 || !gp.fit(xs, ys)) {
        spdlog::warn("surrogate fit failed with {} usable observations; sampling uniformly", xs.size());
        return uniform_point();
    }

    const double best = *std::max_element(ys.begin(), ys.end());
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double var = 0.0;
    for (const double v : ys) {
        var += (v - mean) * (v - mean);
    }
    const double scale = var > 0.0 ? std::sqrt(var / static_cast<double>(ys.size())) : 1.0;

    std::vector<std::size_t> order(ys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ys[a] > ys[b]; });
    const std::size_t incumbents = std::min<std::size_t>(3, order.size());
    static constexpr std::array<double, 3> kStep = {0.02, 0.05, 0.15};

    const auto seen = [&](const std::vector<double>& p) {
        return std::any_of(m_xs.begin(), m_xs.end(), [&](const std::vector<double>& q) {
            for (std::size_t t = 0; t < m_dim; ++t) {
                if (std::abs(p[t] - q[t]) > 1e-9) {
                    return false;
                }
            }
            return true;
        });
    };

    std::vector<double> chosen;
    double chosen_ei = -1.0;
    for (std::size_t c = 0; c < m_config.candidate_pool; ++c) {
        std::vector<double> p;
        if (c % 2 == 0) {
            p = uniform_point();
        } else {
            const auto& inc = xs[order[(c / 2) % incumbents]];
            const double step = kStep[(c / 2) % kStep.size()];
            p.resize(m_dim);
            for (std::size_t t = 0; t < m_dim; ++t) {
                p[t] = std::clamp(inc[t] + step * m_rng.normal(), 0.0, 1.0);
            }
            if (m_repair) {
                m_repair(p);
            }
        }
        if (seen(p)) {
            continue;
        }
        const auto pred = gp.predict(p);
        const double ei = expected_improvement(pred.mean, pred.stddev, best, m_config.xi * scale);
        if (ei > chosen_ei) {
            chosen_ei = ei;
            chosen = std::move(p);
        }
    }
    if (chosen.empty()) {
        return uniform_point();
    }
    m_last_surrogate = true;
    return chosen;
}

void BayesianOptimizer::observe(std::vector<double> x, double value) {
    if (x.size() != m_dim) {
        throw InvalidInput("observation has dimension " + std::to_string(x.size()) + ", expected " +
                           std::to_string(m_dim));
    }
    m_xs.push_back(std::move(x));
    m_ys.push_back(value);
}

BoxTrace maximize(std::size_t dim,
                  const std::function<double(const std::vector<double>&)>& f,
                  std::size_t iterations,
                  const BayesOptConfig& config,
                  RepairFn repair) {
    BayesianOptimizer opt(dim, config, std::move(repair));
    BoxTrace trace;
    for (std::size_t it = 0; it < iterations; ++it) {
        auto x = opt.propose();
        const double y = f(x);
        trace.xs.push_back(x);
        trace.ys.push_back(y);
        opt.observe(std::move(x), y);
        if (std::isfinite(y) && (!std::isfinite(trace.ys[trace.best]) || y > trace.ys[trace.best])) {
            trace.best = it;
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Policy search space

void validate(const SearchSpace& space) {
    if (space.num_levels < 2) {
        throw InvalidInput("search space needs at least 2 levels");
    }
    if (!(std::isfinite(space.threshold_low) && std::isfinite(space.threshold_high) && space.threshold_low > 0.0 &&
          space.threshold_low < space.threshold_high)) {
        throw InvalidInput("threshold bounds must be finite with 0 < low < high");
    }
    if (!(space.ratio_low >= 0.0 && space.ratio_low < space.ratio_high && space.ratio_high <= 1.0)) {
        throw InvalidInput("ratio bounds must satisfy 0 <= low < high <= 1");
    }
}

void repair(const SearchSpace& space, std::vector<double>& unit) {
    if (unit.size() != space.dim()) {
        throw InvalidInput("search point has dimension " + std::to_string(unit.size()) + ", expected " +
                           std::to_string(space.dim()));
    }
    for (auto& v : unit) {
        v = std::clamp(v, 0.0, 1.0);
    }
    const auto split = unit.begin() + static_cast<std::ptrdiff_t>(space.num_levels - 1);
    std::sort(unit.begin(), split, std::greater<>());
    std::sort(split, unit.end());
}

Candidate decode(const SearchSpace& space, std::span<const double> unit) {
    std::vector<double> u(unit.begin(), unit.end());
    repair(space, u);
    Candidate c;
    const std::size_t nt = space.num_levels - 1;
    for (std::size_t i = 0; i < nt; ++i) {
        double t = space.threshold_low + u[i] * (space.threshold_high - space.threshold_low);
        if (!c.thresholds.empty() && t >= c.thresholds.back()) {
            t = std::nextafter(c.thresholds.back(), 0.0);
        }
        c.thresholds.push_back(t);
    }
    for (std::size_t i = nt; i < u.size(); ++i) {
        c.prune_ratios.push_back(space.ratio_low + u[i] * (space.ratio_high - space.ratio_low));
    }
    return c;
}

std::vector<double> encode(const SearchSpace& space, const Candidate& c) {
    if (c.thresholds.size() + 1 != space.num_levels || c.prune_ratios.size() != space.num_levels) {
        throw InvalidInput("candidate does not match the search space level count");
    }
    std::vector<double> u;
    for (const double t : c.thresholds) {
        u.push_back((t - space.threshold_low) / (space.threshold_high - space.threshold_low));
    }
    for (const double p : c.prune_ratios) {
        u.push_back((p - space.ratio_low) / (space.ratio_high - space.ratio_low));
    }
    return u;
}

PruningPolicy apply_candidate(const PruningPolicy& base, const Candidate& c) {
    PruningPolicy p = base;
    p.thresholds = c.thresholds;
    p.prune_ratios = c.prune_ratios;
    return p;
}

double objective(double accuracy, std::span<const double> level_fractions, std::span<const double> prune_ratios, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidInput("alpha must be in [0, 1]");
    }
    if (level_fractions.size() != prune_ratios.size()) {
        throw InvalidInput("level fractions and pruning ratios differ in length");
    }
    const double total = std::accumulate(level_fractions.begin(), level_fractions.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidInput("level fractions must sum to 1");
    }
    if (std::any_of(prune_ratios.begin(), prune_ratios.end(), [](double p) { return !(p >= 0.0 && p <= 1.0); })) {
        throw InvalidInput("pruning ratios must be in [0, 1]");
    }
    double efficiency = 0.0;
    for (std::size_t i = 0; i < prune_ratios.size(); ++i) {
        efficiency += level_fractions[i] * prune_ratios[i];
    }
    return alpha * accuracy + (1.0 - alpha) * efficiency;
}

// ---------------------------------------------------------------------------
// Benchmark evaluation

PruningPolicy EvaluationOptions::default_search_template() {
    PruningPolicy p = builtin_policy("qwen2.5-vl-7b");
    p.model_id = "search";
    p.final_budget = FinalBudget::fraction(1.0);
    p.provenance = "search template";
    return p;
}

BenchEvaluator::BenchEvaluator(const SyntheticBenchmark& bench, EvaluationOptions options)
    : m_bench(bench), m_options(std::move(options)) {
    if (bench.items.empty()) {
        throw InvalidInput("benchmark has no items");
    }
    m_options.base.patch_h = bench.items.front().geometry.patch_h;
    m_options.base.patch_w = bench.items.front().geometry.patch_w;
    m_maps.reserve(bench.items.size());
    for (const auto& item : bench.items) {
        m_maps.push_back(compute_entropy_map(to_luminance(item.image), item.geometry, m_options.base.bins));
    }
}

Observation BenchEvaluator::evaluate(const Candidate& candidate) const {
    Observation obs;
    obs.candidate = candidate;
    const std::size_t n = m_bench.items.size();
    const std::size_t levels = candidate.prune_ratios.size();

    std::vector<double> recall(n, 0.0);
    std::vector<std::size_t> level(n, 0);
    std::vector<std::string> errors(n);

    PruningPolicy policy;
    try {
        policy = apply_candidate(m_options.base, candidate);
        ensure_valid(policy);
    } catch (const Error& e) {
        obs.failed = true;
        obs.error = e.what();
        obs.objective = -std::numeric_limits<double>::infinity();
        return obs;
    }

    const auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            try {
                const auto& item = m_bench.items[i];
                SyntheticAttentionProvider attention(attention_config_for(item, m_options.relevance_gain));
                const PipelineResult r = run_pipeline(m_maps[i], policy, attention);
                recall[i] = score(r, item);
                level[i] = r.decision.level;
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(m_options.workers, 1, n);
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w, workers);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            obs.failed = true;
            obs.error = "item " + std::to_string(i) + ": " + errors[i];
            obs.objective = -std::numeric_limits<double>::infinity();
            return obs;
        }
    }
    obs.level_fractions.assign(levels, 0.0);
    double recall_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        recall_sum += recall[i];
        obs.level_fractions[level[i] - 1] += 1.0;
    }
    for (auto& c : obs.level_fractions) {
        c /= static_cast<double>(n);
    }
    obs.accuracy = recall_sum / static_cast<double>(n);
    obs.efficiency_term = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
        obs.efficiency_term += obs.level_fractions[i] * candidate.prune_ratios[i];
    }
    obs.objective = objective(obs.accuracy, obs.level_fractions, candidate.prune_ratios, m_options.alpha);
    return obs;
}

Observation evaluate_candidate(const Candidate& candidate, const SyntheticBenchmark& bench, const EvaluationOptions& options) {
    return BenchEvaluator(bench, options).evaluate(candidate);
}

// ---------------------------------------------------------------------------
// Runs

std::size_t select_by_accuracy(const std::vector<Observation>& trace) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& o = trace[i];
        if (o.failed) {
            continue;
        }
        if (!best || o.accuracy > trace[*best].accuracy ||
            (o.accuracy == trace[*best].accuracy && o.objective > trace[*best].objective)) {
            best = i;
        }
    }
    if (!best) {
        throw InvalidState("every candidate evaluation failed");
    }
    return *best;
}

std::size_t select_by_objective(const std::vector<Observation>& trace) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!trace[i].failed && (!best || trace[i].objective > trace[*best].objective)) {
            best = i;
        }
    }
    if (!best) {
        throw InvalidState("every candidate evaluation failed");
    }
    return *best;
}

namespace {

void check_run(const SearchSpace& space, const OptimizerOptions& options) {
    validate(space);
    if (options.iterations < 10) {
        throw InvalidInput("optimization needs at least 10 iterations, got " + std::to_string(options.iterations));
    }
    if (!(options.evaluation.alpha >= 0.0 && options.evaluation.alpha <= 1.0)) {
        throw InvalidInput("alpha must be in [0, 1]");
    }
}

OptimizationResult finish(std::vector<Observation> trace, const EvaluationOptions& eval, const SyntheticBenchmark& bench) {
    OptimizationResult r;
    r.trace = std::move(trace);
    double running = -std::numeric_limits<double>::infinity();
    for (const auto& o : r.trace) {
        if (!o.failed) {
            running = std::max(running, o.objective);
        }
        r.best_so_far.push_back(running);
    }
    r.best_by_accuracy = select_by_accuracy(r.trace);
    r.best_by_objective = select_by_objective(r.trace);
    PruningPolicy base = eval.base;
    base.patch_h = bench.items.front().geometry.patch_h;
    base.patch_w = bench.items.front().geometry.patch_w;
    r.policy_by_accuracy = apply_candidate(base, r.trace[r.best_by_accuracy].candidate);
    r.policy_by_objective = apply_candidate(base, r.trace[r.best_by_objective].candidate);
    r.policy_by_accuracy.provenance = "optimized (highest accuracy)";
    r.policy_by_objective.provenance = "optimized (highest objective)";
    return r;
}

}  // namespace

OptimizationResult run_optimizer(const SearchSpace& space, const SyntheticBenchmark& bench, const OptimizerOptions& options) {
    check_run(space, options);
    const BenchEvaluator evaluator(bench, options.evaluation);
    BayesOptConfig cfg;
    cfg.initial_points = options.initial_points;
    cfg.candidate_pool = options.candidate_pool;
    cfg.seed = options.seed;
    BayesianOptimizer bo(space.dim(), cfg, [&space](std::vector<double>& u) { repair(space, u); });

    std::vector<Observation> trace;
    for (std::size_t it = 0; it < options.iterations; ++it) {
        auto u = bo.propose();
        Observation obs = evaluator.evaluate(decode(space, u));
        obs.iteration = it;
        if (obs.failed) {
            spdlog::warn("candidate {} failed: {}", it, obs.error);
        }
        bo.observe(std::move(u), obs.failed ? std::numeric_limits<double>::quiet_NaN() : obs.objective);
        trace.push_back(std::move(obs));
    }
    return finish(std::move(trace), options.evaluation, bench);
}

OptimizationResult run_random_search(const SearchSpace& space,
                                     const SyntheticBenchmark& bench,
                                     const OptimizerOptions& options) {
    check_run(space, options);
    const BenchEvaluator evaluator(bench, options.evaluation);
    Rng rng(hash_combine(options.seed, 0x52));
    std::vector<Observation> trace;
    for (std::size_t it = 0; it < options.iterations; ++it) {
        std::vector<double> u(space.dim());
        for (auto& v : u) {
            v = rng.uniform();
        }
        Observation obs = evaluator.evaluate(decode(space, u));
        obs.iteration = it;
        trace.push_back(std::move(obs));
    }
    return finish(std::move(trace), options.evaluation, bench);
}

std::string trace_csv(const std::vector<Observation>& trace) {
    std::ostringstream os;
    os.precision(17);
    const std::size_t levels = trace.empty() ? 0 : trace.front().candidate.prune_ratios.size();
    os << "iteration";
    for (std::size_t i = 1; i < levels; ++i) {
        os << ",theta_" << i;
    }
    for (std::size_t i = 1; i <= levels; ++i) {
        os << ",p_" << i;
    }
    os << ",accuracy,efficiency_term,objective";
    for (std::size_t i = 1; i <= levels; ++i) {
        os << ",c_" << i;
    }
    os << ",failed\n";
    for (const auto& o : trace) {
        os << o.iteration;
        for (const double t : o.candidate.thresholds) {
            os << ',' << t;
        }
        for (const double p : o.candidate.prune_ratios) {
            os << ',' << p;
        }
        os << ',' << o.accuracy << ',' << o.efficiency_term << ',' << o.objective;
        for (std::size_t i = 0; i < levels; ++i) {
            os << ',' << (i < o.level_fractions.size() ? o.level_fractions[i] : 0.0);
        }
        os << ',' << (o.failed ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace erase
