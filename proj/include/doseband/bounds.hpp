#pragma once

// Ignorance intervals for conditional (CAPO) and average (APO) potential
// outcomes under the continuous-treatment marginal sensitivity model.
//
// For a weighting w(y) in [0,1] the bound objective is
//
//   mu(w) = mu~ + I(w(y) (y - mu~)) / (gamma + I(w(y))),  gamma = 1 / (Lambda^2 - 1),
//
// where I is an estimator of E_{p(y|t,x)}[.]. The infimum over non-increasing
// and the supremum over non-decreasing weightings are attained by Heaviside
// steps, so the CAPO interval is found by searching over step thresholds.
//
// Every (x, t) evaluation freezes one integration node set (MC draws, GH
// nodes, or an explicit discrete support). The same nodes serve every
// threshold and every Lambda, which makes the intervals nested in Lambda.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "doseband/density.hpp"
#include "doseband/quadrature.hpp"

namespace doseband {

// Sensitivity parameter; values below 1 + 1e-9 collapse to exactly 1.
class Lambda {
 public:
  explicit Lambda(double value);
  double value() const { return value_; }
  // 1 / (Lambda^2 - 1); +inf at Lambda = 1.
  double gamma() const;
  bool is_unit() const { return value_ == 1.0; }

 private:
  double value_;
};

enum class Direction {
  kNonIncreasing,  // w(y) = H(threshold - y): lower bound
  kNonDecreasing,  // w(y) = H(y - threshold): upper bound
};

// Heaviside weighting with H(0) = 1. A threshold of +inf (non-decreasing) or
// -inf (non-increasing) is the empty weighting w = 0.
struct StepWeight {
  double threshold = 0.0;
  Direction direction = Direction::kNonDecreasing;
  double operator()(double y) const;
};

// Logistic relaxation S(+-(y - y_star) / (softplus(s) + zeta)).
struct SigmoidWeight {
  double y_star = 0.0;
  double s = 0.0;
  double zeta = 1e-3;
  Direction direction = Direction::kNonDecreasing;
  double scale() const;
  double operator()(double y) const;
};

enum class Estimator { kMonteCarlo, kGaussHermite, kExact };
enum class ThresholdGrid { kSamples, kEven };
enum class BoundOptimizer { kGrid, kLine, kGradient };

std::string to_string(BoundOptimizer opt);
BoundOptimizer bound_optimizer_from_string(const std::string& name);
std::string to_string(Estimator est);
Estimator estimator_from_string(const std::string& name);

struct GradientOptions {
  double learning_rate = 0.5;
  int max_iters = 4000;
  double tolerance = 1e-7;  // on ||omega_{i+1} - omega_i|| in standardized units
  double zeta = 1e-3;
  std::vector<double> init_quantiles{0.1, 0.5, 0.9};
};

struct BoundSpec {
  Estimator estimator = Estimator::kMonteCarlo;
  std::size_t mc_samples = 1024;
  int gh_order = 64;
  ThresholdGrid grid = ThresholdGrid::kSamples;
  std::size_t even_points = 256;
  std::uint64_t seed = 0;
  BoundOptimizer optimizer = BoundOptimizer::kGrid;
  GradientOptions gradient;
};

struct WeightMoments {
  double mass = 0.0;      // I(w)
  double centered = 0.0;  // I(w (y - mu~))
};

// Weighted point set: sorted ascending, duplicates merged, positive
// probabilities, prefix sums for O(log n) step moments.
class WeightedSupport {
 public:
  WeightedSupport() = default;
  static WeightedSupport from_draws(std::vector<double> draws);
  static WeightedSupport from_weighted(std::span<const double> points,
                                       std::span<const double> probs);

  std::span<const double> points() const { return points_; }
  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return points_.size(); }
  double total_mass() const { return prefix_mass_.back(); }
  double mean() const;
  double stddev() const;
  // Weighted left-continuous quantile.
  double quantile(double q) const;

  // I(w) and I(w (y - mu_tilde)) for a step.
  WeightMoments step_moments(const StepWeight& w, double mu_tilde) const;
  WeightMoments moments(const std::function<double(double)>& w, double mu_tilde) const;

 private:
  std::vector<double> points_, probs_;
  std::vector<double> prefix_mass_, prefix_first_;  // size n + 1, first centred at ref_
  double ref_ = 0.0;
};

// Closed-form step moments under a Gaussian mixture.
WeightMoments exact_step_moments(const MixtureDensity& mix, const StepWeight& w, double mu_tilde);

// The frozen ingredients of one CAPO evaluation.
class CapoProblem {
 public:
  // Integration over the mixture with the estimator in spec. Threshold
  // candidates come from the same draws (or an even grid).
  static CapoProblem from_mixture(const MixtureDensity& mix, const BoundSpec& spec,
                                  std::uint64_t seed);
  static CapoProblem from_mixture(const MixtureDensity& mix, double mu_tilde,
                                  const BoundSpec& spec, std::uint64_t seed);
  // Exact integrals over an explicit discrete distribution.
  static CapoProblem from_support(std::span<const double> points, std::span<const double> probs,
                                  double mu_tilde);

  double mu_tilde() const { return mu_tilde_; }
  std::span<const double> thresholds() const { return thresholds_; }
  const WeightedSupport& support() const { return support_; }

  WeightMoments moments(const StepWeight& w) const;
  WeightMoments moments(const std::function<double(double)>& w) const;

  // Shift means, mu~, nodes and thresholds by c.
  CapoProblem shifted(double c) const;

 private:
  double mu_tilde_ = 0.0;
  WeightedSupport support_;
  std::optional<MixtureDensity> exact_;
  std::vector<double> thresholds_;
};

struct SensitivityBound {
  double lower = 0.0;
  double upper = 0.0;
  double mu_tilde = 0.0;
  double lambda = 1.0;
  BoundOptimizer optimizer = BoundOptimizer::kGrid;
  double argmin_threshold = -std::numeric_limits<double>::infinity();
  double argmax_threshold = std::numeric_limits<double>::infinity();
  bool converged = true;
  double width() const { return upper - lower; }
};

// mu(w) from precomputed moments. Lambda must exceed 1.
double mu_w(const WeightMoments& m, double mu_tilde, Lambda lambda);
double mu_w(const StepWeight& w, const CapoProblem& problem, Lambda lambda);
double mu_w(const SigmoidWeight& w, const CapoProblem& problem, Lambda lambda);
double mu_w(const std::function<double(double)>& w, const CapoProblem& problem, Lambda lambda);

SensitivityBound capo_bounds_grid(const CapoProblem& problem, Lambda lambda);
SensitivityBound capo_bounds_line(const CapoProblem& problem, Lambda lambda);
SensitivityBound capo_bounds_gradient(const CapoProblem& problem, Lambda lambda,
                                      const GradientOptions& opts = {});
SensitivityBound capo_bounds(const CapoProblem& problem, Lambda lambda, const BoundSpec& spec);

// Seed of the frozen node set for (x, t) under spec.seed.
std::uint64_t problem_seed(const BoundSpec& spec, std::span<const double> x, double t);
CapoProblem make_problem(const ConditionalDensityModel& model, std::span<const double> x,
                         double t, const BoundSpec& spec);

SensitivityBound capo_bounds_grid(const ConditionalDensityModel& model, std::span<const double> x,
                                  double t, Lambda lambda, const BoundSpec& spec);
SensitivityBound capo_bounds_line(const ConditionalDensityModel& model, std::span<const double> x,
                                  double t, Lambda lambda, const BoundSpec& spec);
SensitivityBound capo_bounds_gradient(const ConditionalDensityModel& model,
                                      std::span<const double> x, double t, Lambda lambda,
                                      const BoundSpec& spec);
SensitivityBound capo_bounds(const ConditionalDensityModel& model, std::span<const double> x,
                             double t, Lambda lambda, const BoundSpec& spec);

// Bounds at several Lambda values on one frozen node set.
std::vector<SensitivityBound> capo_bounds_sweep(const ConditionalDensityModel& model,
                                                std::span<const double> x, double t,
                                                std::span<const double> lambdas,
                                                const BoundSpec& spec);

// xs is row-major with model.input_dim() columns.
SensitivityBound apo_bounds(const ConditionalDensityModel& model, std::span<const double> xs,
                            double t, Lambda lambda, const BoundSpec& spec);
std::vector<SensitivityBound> apo_bounds_sweep(const ConditionalDensityModel& model,
                                               std::span<const double> xs, double t,
                                               std::span<const double> lambdas,
                                               const BoundSpec& spec);

constexpr double kLambdaInfinityProxy = 1e4;

// Width at lambda relative to the width at a large-Lambda proxy, in [0, 1].
double rho(const ConditionalDensityModel& model, std::span<const double> x, double t,
           Lambda lambda, const BoundSpec& spec, Lambda proxy = Lambda(kLambdaInfinityProxy));
double rho(const CapoProblem& problem, Lambda lambda, const BoundSpec& spec,
           Lambda proxy = Lambda(kLambdaInfinityProxy));

struct KlDiagnostic {
  double kl = 0.0;
  bool satisfied = false;
};

// KL(nominal || marginal) by adaptive quadrature; satisfied iff kl <= log(Lambda).
KlDiagnostic kl_diagnostic(const MixtureDensity& nominal, const MixtureDensity& marginal,
                           Lambda lambda);

}  // namespace doseband
