#pragma once

// Percentile-bootstrap confidence intervals around the ignorance intervals.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "doseband/bounds.hpp"
#include "doseband/density.hpp"

namespace doseband {

// n_b resamples of n rows each, drawn with replacement. Replicate k depends
// only on (seed, k).
std::vector<Dataset> resample(const Dataset& data, std::size_t n_b, std::uint64_t seed);
Dataset resample_one(const Dataset& data, std::uint64_t seed, std::size_t k);

// Smallest order statistic v with empirical CDF(v) >= q.
double quantile(std::span<const double> values, double q);

std::uint64_t dataset_digest(const Dataset& data);

struct BootstrapEnsemble {
  std::vector<ConditionalDensityModel> models;
  std::vector<std::uint64_t> seeds;  // training seed of each replicate
  std::uint64_t root_seed = 0;
  std::uint64_t source_hash = 0;

  std::size_t size() const { return models.size(); }
  std::uint64_t digest() const;

  // Directory of model_###.json plus manifest.json.
  void save(const std::string& dir) const;
  static BootstrapEnsemble load(const std::string& dir);
};

// Trains one model per resample. Replicates run on up to `jobs` threads;
// the result does not depend on jobs.
BootstrapEnsemble fit_ensemble(const Dataset& data, const DensityModelConfig& config,
                               std::size_t n_b, std::uint64_t seed, int jobs = 1);

struct ConfidenceBound {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  double lambda = 1.0;
};

ConfidenceBound capo_ci(const BootstrapEnsemble& ensemble, std::span<const double> x, double t,
                        Lambda lambda, double alpha, const BoundSpec& spec);
ConfidenceBound apo_ci(const BootstrapEnsemble& ensemble, std::span<const double> xs, double t,
                       Lambda lambda, double alpha, const BoundSpec& spec);

// Percentile interval from per-replicate bounds.
ConfidenceBound percentile_interval(std::span<const SensitivityBound> replicate_bounds,
                                    double alpha);

// All (lambda, alpha) combinations for the APO at t, one pass per replicate.
// Result index is [lambda][alpha].
std::vector<std::vector<ConfidenceBound>> apo_ci_sweep(const BootstrapEnsemble& ensemble,
                                                       std::span<const double> xs, double t,
                                                       std::span<const double> lambdas,
                                                       std::span<const double> alphas,
                                                       const BoundSpec& spec, int jobs = 1);

}  // namespace doseband
