// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "erase/policy.hpp"
#include "erase/rng.hpp"
#include "erase/synth_bench.hpp"

namespace erase {

// ---------------------------------------------------------------------------
// Generic Bayesian optimization over the unit box.

/// Matern-5/2 correlation at scaled distance r >= 0.
double matern52(double r);

/// Expected improvement of a maximization problem over `best`.
double expected_improvement(double mean, double stddev, double best, double xi = 0.0);

/// n points in [0,1]^dim, one per stratum along every axis.
std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dim, Rng& rng);

/// Gaussian-process regressor with a Matern-5/2 ARD kernel. Targets are
/// standardized internally; the signal variance is profiled out and the
/// log length-scales and noise ratio are chosen by grid search on the
/// marginal likelihood.
class GaussianProcess {
public:
    GaussianProcess();
    ~GaussianProcess();
    GaussianProcess(GaussianProcess&&) noexcept;
    GaussianProcess& operator=(GaussianProcess&&) noexcept;

    /// Returns false when no hyperparameter setting yields a positive
    /// definite kernel matrix.
    bool fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys);

    struct Prediction {
        double mean = 0.0;
        double stddev = 0.0;
    };
    /// Posterior of the latent function, in the units of the fitted targets.
    Prediction predict(std::span<const double> x) const;

    std::vector<double> length_scales() const;
    double noise_ratio() const;
    double log_marginal_likelihood() const;

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

struct BayesOptConfig {
    std::size_t initial_points = 10;   ///< Latin-hypercube seed design, at least 5
    std::size_t candidate_pool = 1024;  ///< feasible points scored by EI per proposal
    double xi = 0.01;                   ///< EI exploration margin in standardized units
    std::uint64_t seed = 0;
};

/// Maps an arbitrary point of [0,1]^dim onto the feasible set in place.
using RepairFn = std::function<void(std::vector<double>&)>;

/// Ask/tell optimizer state: observations, surrogate and RNG.
class BayesianOptimizer {
public:
    BayesianOptimizer(std::size_t dim, BayesOptConfig config, RepairFn repair = {});

    /// Next point to evaluate: the Latin-hypercube design first, then the EI
    /// maximizer over a pool of random and incumbent-local feasible samples.
    /// Falls back to a uniform sample if the surrogate cannot be fitted.
    std::vector<double> propose();

    /// Records an evaluation. A non-finite value marks a failed evaluation,
    /// which is kept in the history but not fed to the surrogate.
    void observe(std::vector<double> x, double value);

    std::size_t dim() const noexcept { return m_dim; }
    const std::vector<std::vector<double>>& points() const noexcept { return m_xs; }
    const std::vector<double>& values() const noexcept { return m_ys; }
    bool last_used_surrogate() const noexcept { return m_last_surrogate; }

private:
    std::vector<double> uniform_point();

    std::size_t m_dim;
    BayesOptConfig m_config;
    RepairFn m_repair;
    Rng m_rng;
    std::vector<std::vector<double>> m_design;
    std::vector<std::vector<double>> m_xs;
    std::vector<double> m_ys;
    bool m_last_surrogate = false;
};

struct BoxTrace {
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    std::size_t best = 0;
};

/// Runs `iterations` ask/tell rounds maximizing `f` over [0,1]^dim.
BoxTrace maximize(std::size_t dim,
                  const std::function<double(const std::vector<double>&)>& f,
                  std::size_t iterations,
                  const BayesOptConfig& config,
                  RepairFn repair = {});

// ---------------------------------------------------------------------------
// Pruning-policy search.

/// Box over N-1 thresholds and N pruning ratios. Feasible points have
/// strictly decreasing thresholds and nondecreasing ratios.
struct SearchSpace {
    std::size_t num_levels = 4;
    double threshold_low = 0.05;
    double threshold_high = 5.5;
    double ratio_low = 0.0;
    double ratio_high = 1.0;

    std::size_t dim() const noexcept { return 2 * num_levels - 1; }
};

void validate(const SearchSpace& space);

/// Sorts the threshold coordinates descending and the ratio coordinates
/// ascending, which makes any point of the unit box feasible.
void repair(const SearchSpace& space, std::vector<double>& unit);

struct Candidate {
    std::vector<double> thresholds;
    std::vector<double> prune_ratios;
};

/// Feasible candidate of a (repaired) unit-box point.
Candidate decode(const SearchSpace& space, std::span<const double> unit);

/// Unit-box coordinates of a candidate (inverse of decode).
std::vector<double> encode(const SearchSpace& space, const Candidate& c);

/// Template policy with the candidate's thresholds and ratios.
PruningPolicy apply_candidate(const PruningPolicy& base, const Candidate& c);

/// alpha * accuracy + (1 - alpha) * sum_i c_i p_i. Requires sum c = 1 (1e-9),
/// every p in [0,1] and alpha in [0,1]; throws InvalidInput otherwise.
double objective(double accuracy, std::span<const double> level_fractions, std::span<const double> prune_ratios, double alpha);

struct Observation {
    std::size_t iteration = 0;
    Candidate candidate;
    double accuracy = 0.0;
    std::vector<double> level_fractions;
    double efficiency_term = 0.0;
    double objective = 0.0;
    bool failed = false;
    std::string error;
};

struct EvaluationOptions {
    /// Layers, patch size, bins and final budget of evaluated policies.
    PruningPolicy base = default_search_template();
    double alpha = 0.65;
    double relevance_gain = 1.0;
    std::size_t workers = 1;  ///< threads across benchmark items; results do not depend on it

    /// qwen2.5-vl-7b layers with a keep-everything final budget, so accuracy
    /// measures what stage 1 loses.
    static PruningPolicy default_search_template();
};

/// Scores candidates on a benchmark. Entropy maps are computed once.
class BenchEvaluator {
public:
    BenchEvaluator(const SyntheticBenchmark& bench, EvaluationOptions options);

    /// Runs the pipeline on every item: accuracy is the mean salient recall,
    /// c_i the fraction of items classified at level i. Pipeline failures are
    /// reported as a failed Observation.
    Observation evaluate(const Candidate& candidate) const;

    const EvaluationOptions& options() const noexcept { return m_options; }

private:
    const SyntheticBenchmark& m_bench;
    EvaluationOptions m_options;
    std::vector<EntropyMap> m_maps;
};

Observation evaluate_candidate(const Candidate& candidate, const SyntheticBenchmark& bench, const EvaluationOptions& options = {});

struct OptimizerOptions {
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    std::size_t initial_points = 10;
    std::size_t candidate_pool = 1024;
    EvaluationOptions evaluation;
};

struct OptimizationResult {
    std::vector<Observation> trace;
    std::vector<double> best_so_far;  ///< running max of the objective
    std::size_t best_by_accuracy = 0;
    std::size_t best_by_objective = 0;
    PruningPolicy policy_by_accuracy;   ///< the operative policy
    PruningPolicy policy_by_objective;
};

/// Index of the highest-accuracy observation; ties go to the higher
/// objective, then the earlier iteration. Failed rows are skipped.
std::size_t select_by_accuracy(const std::vector<Observation>& trace);
std::size_t select_by_objective(const std::vector<Observation>& trace);

/// Latin-hypercube seeding then GP/EI proposals. Requires iterations >= 10.
OptimizationResult run_optimizer(const SearchSpace& space, const SyntheticBenchmark& bench, const OptimizerOptions& options);

/// Same budget spent on uniform feasible samples; the baseline the
/// surrogate has to beat.
OptimizationResult run_random_search(const SearchSpace& space,
                                     const SyntheticBenchmark& bench,
                                     const OptimizerOptions& options);

/// iteration, theta_1.., p_1.., accuracy, efficiency_term, objective, c_1..
std::string trace_csv(const std::vector<Observation>& trace);

}  // namespace erase
