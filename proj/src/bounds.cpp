#include "doseband/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doseband/error.hpp"
#include "doseband/hash.hpp"

namespace doseband {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double logistic(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

SensitivityBound collapsed(double mu_tilde, BoundOptimizer opt) {
  SensitivityBound b;
  b.lower = b.upper = b.mu_tilde = mu_tilde;
  b.lambda = 1.0;
  b.optimizer = opt;
  return b;
}

// The empty weighting w = 0 evaluates to mu~ and is a member of both step
// classes (threshold beyond the support).
void include_empty_weighting(SensitivityBound& b) {
  if (!(b.lower <= b.mu_tilde)) {
    b.lower = b.mu_tilde;
    b.argmin_threshold = -kInf;
  }
  if (!(b.upper >= b.mu_tilde)) {
    b.upper = b.mu_tilde;
    b.argmax_threshold = kInf;
  }
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

Lambda::Lambda(double value) : value_(value) {
  if (!(value >= 1.0) || std::isnan(value)) {
    throw InputError("Lambda must be >= 1, got " + std::to_string(value));
  }
  if (value < 1.0 + 1e-9) value_ = 1.0;
}

double Lambda::gamma() const {
  if (is_unit()) return kInf;
  if (std::isinf(value_)) return 0.0;
  return 1.0 / (value_ * value_ - 1.0);
}

double StepWeight::operator()(double y) const {
  const double arg = direction == Direction::kNonDecreasing ? y - threshold : threshold - y;
  return arg >= 0.0 ? 1.0 : 0.0;
}

double SigmoidWeight::scale() const { return softplus(s) + zeta; }

double SigmoidWeight::operator()(double y) const {
  const double arg = direction == Direction::kNonDecreasing ? y - y_star : y_star - y;
  return logistic(arg / scale());
}

std::string to_string(BoundOptimizer opt) {
  switch (opt) {
    case BoundOptimizer::kGrid: return "grid";
    case BoundOptimizer::kLine: return "line";
    case BoundOptimizer::kGradient: return "gradient";
  }
  return "grid";
}

BoundOptimizer bound_optimizer_from_string(const std::string& name) {
  if (name == "grid") return BoundOptimizer::kGrid;
  if (name == "line") return BoundOptimizer::kLine;
  if (name == "gradient") return BoundOptimizer::kGradient;
  throw InputError("unknown optimizer '" + name + "' (expected grid, line or gradient)");
}

std::string to_string(Estimator est) {
  switch (est) {
    case Estimator::kMonteCarlo: return "mc";
    case Estimator::kGaussHermite: return "gh";
    case Estimator::kExact: return "exact";
  }
  return "mc";
}

Estimator estimator_from_string(const std::string& name) {
  if (name == "mc") return Estimator::kMonteCarlo;
  if (name == "gh") return Estimator::kGaussHermite;
  if (name == "exact") return Estimator::kExact;
  throw InputError("unknown estimator '" + name + "' (expected mc, gh or exact)");
}

// ---------------------------------------------------------------------------
// WeightedSupport

WeightedSupport WeightedSupport::from_draws(std::vector<double> draws) {
  if (draws.empty()) throw InputError("support: no draws");
  const std::vector<double> probs(draws.size(), 1.0 / static_cast<double>(draws.size()));
  return from_weighted(draws, probs);
}

WeightedSupport WeightedSupport::from_weighted(std::span<const double> points,
                                               std::span<const double> probs) {
  if (points.empty() || points.size() != probs.size()) {
    throw InputError("support: points and probabilities must be non-empty and equal length");
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  WeightedSupport s;
  for (std::size_t i : order) {
    if (!std::isfinite(points[i]) || !(probs[i] >= 0.0)) {
      throw InputError("support: points must be finite and probabilities non-negative");
    }
    if (probs[i] == 0.0) continue;
    if (!s.points_.empty() && s.points_.back() == points[i]) {
      s.probs_.back() += probs[i];
    } else {
      s.points_.push_back(points[i]);
      s.probs_.push_back(probs[i]);
    }
  }
  if (s.points_.empty()) throw InputError("support: all probabilities are zero");

  double mass = 0.0, first = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mass += s.probs_[i];
    first += s.probs_[i] * s.points_[i];
  }
  s.ref_ = first / mass;
  s.prefix_mass_.assign(s.size() + 1, 0.0);
  s.prefix_first_.assign(s.size() + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.prefix_mass_[i + 1] = s.prefix_mass_[i] + s.probs_[i];
    s.prefix_first_[i + 1] = s.prefix_first_[i] + s.probs_[i] * (s.points_[i] - s.ref_);
  }
  return s;
}

double WeightedSupport::mean() const { return ref_ + prefix_first_.back() / total_mass(); }

double WeightedSupport::stddev() const {
  const double m = mean();
  double var = 0.0;
  for (std::size_t i = 0; i < size(); ++i) var += probs_[i] * (points_[i] - m) * (points_[i] - m);
  return std::sqrt(var / total_mass());
}

double WeightedSupport::quantile(double q) const {
  const double target = std::clamp(q, 0.0, 1.0) * total_mass();
  const auto it = std::lower_bound(prefix_mass_.begin() + 1, prefix_mass_.end(), target);
  const auto idx = static_cast<std::size_t>(std::distance(prefix_mass_.begin() + 1, it));
  return points_[std::min(idx, size() - 1)];
}

WeightMoments WeightedSupport::step_moments(const StepWeight& w, double mu_tilde) const {
  std::size_t lo = 0, hi = size();
  if (w.direction == Direction::kNonIncreasing) {
    hi = static_cast<std::size_t>(
        std::distance(points_.begin(), std::upper_bound(points_.begin(), points_.end(), w.threshold)));
  } else {
    lo = static_cast<std::size_t>(
        std::distance(points_.begin(), std::lower_bound(points_.begin(), points_.end(), w.threshold)));
  }
  WeightMoments m;
  if (lo >= hi) return m;
  m.mass = prefix_mass_[hi] - prefix_mass_[lo];
  m.centered = (prefix_first_[hi] - prefix_first_[lo]) + (ref_ - mu_tilde) * m.mass;
  return m;
}

WeightMoments WeightedSupport::moments(const std::function<double(double)>& w,
                                       double mu_tilde) const {
  WeightMoments m;
  for (std::size_t i = 0; i < size(); ++i) {
    const double wi = w(points_[i]);
    m.mass += probs_[i] * wi;
    m.centered += probs_[i] * wi * (points_[i] - mu_tilde);
  }
  return m;
}

WeightMoments exact_step_moments(const MixtureDensity& mix, const StepWeight& w, double mu_tilde) {
  WeightMoments m;
  double first = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double sigma = std::sqrt(mix.variances[j]);
    const double z = (w.threshold - mix.means[j]) / sigma;
    if (w.direction == Direction::kNonDecreasing) {
      const double tail = normal_sf(z);
      m.mass += mix.weights[j] * tail;
      first += mix.weights[j] * (mix.means[j] * tail + sigma * normal_pdf(z));
    } else {
      const double head = normal_cdf(z);
      m.mass += mix.weights[j] * head;
      first += mix.weights[j] * (mix.means[j] * head - sigma * normal_pdf(z));
    }
  }
  m.centered = first - mu_tilde * m.mass;
  return m;
}

// ---------------------------------------------------------------------------
// CapoProblem

CapoProblem CapoProblem::from_mixture(const MixtureDensity& mix, const BoundSpec& spec,
                                      std::uint64_t seed) {
  return from_mixture(mix, conditional_mean(mix), spec, seed);
}

CapoProblem CapoProblem::from_mixture(const MixtureDensity& mix, double mu_tilde,
                                      const BoundSpec& spec, std::uint64_t seed) {
  mix.validate();
  if (spec.mc_samples < 1) throw InputError("bound spec: mc_samples must be >= 1");
  CapoProblem p;
  p.mu_tilde_ = mu_tilde;
  std::mt19937_64 rng(seed);
  std::vector<double> draws = sample(mix, spec.mc_samples, rng);

  if (spec.estimator == Estimator::kMonteCarlo) {
    p.support_ = WeightedSupport::from_draws(draws);
  } else {
    const auto rule = hermite_rule(spec.gh_order);
    std::vector<double> points, probs;
    gh_mixture_nodes(mix, rule, points, probs);
    p.support_ = WeightedSupport::from_weighted(points, probs);
    if (spec.estimator == Estimator::kExact) p.exact_ = mix;
  }

  if (spec.grid == ThresholdGrid::kSamples) {
    p.thresholds_ = unique_sorted(std::move(draws));
  } else {
    if (spec.even_points < 2) throw InputError("bound spec: even grid needs >= 2 points");
    const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / static_cast<double>(draws.size()));
    const double lo = *lo_it - sd, hi = *hi_it + sd;
    p.thresholds_.resize(spec.even_points);
    for (std::size_t i = 0; i < spec.even_points; ++i) {
      p.thresholds_[i] = lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(spec.even_points - 1);
    }
    p.thresholds_ = unique_sorted(std::move(p.thresholds_));
  }
  return p;
}

CapoProblem CapoProblem::from_support(std::span<const double> points,
                                      std::span<const double> probs, double mu_tilde) {
  CapoProblem p;
  p.mu_tilde_ = mu_tilde;
  p.support_ = WeightedSupport::from_weighted(points, probs);
  p.thresholds_.assign(p.support_.points().begin(), p.support_.points().end());
  return p;
}

WeightMoments CapoProblem::moments(const StepWeight& w) const {
  if (exact_) return exact_step_moments(*exact_, w, mu_tilde_);
  return support_.step_moments(w, mu_tilde_);
}

WeightMoments CapoProblem::moments(const std::function<double(double)>& w) const {
  return support_.moments(w, mu_tilde_);
}

CapoProblem CapoProblem::shifted(double c) const {
  CapoProblem p;
  p.mu_tilde_ = mu_tilde_ + c;
  std::vector<double> pts(support_.points().begin(), support_.points().end());
  for (double& v : pts) v += c;
  p.support_ = WeightedSupport::from_weighted(pts, support_.probs());
  if (exact_) {
    p.exact_ = *exact_;
    for (double& m : p.exact_->means) m += c;
  }
  p.thresholds_ = thresholds_;
  for (double& v : p.thresholds_) v += c;
  return p;
}

// ---------------------------------------------------------------------------
// Objective and optimizers

double mu_w(const WeightMoments& m, double mu_tilde, Lambda lambda) {
  if (lambda.is_unit()) throw InputError("mu_w: Lambda must exceed 1 (Lambda = 1 has no width)");
  const double value = mu_tilde + m.centered / (lambda.gamma() + m.mass);
  if (!std::isfinite(value)) throw NumericError("mu_w: non-finite bound objective");
  return value;
}

double mu_w(const StepWeight& w, const CapoProblem& problem, Lambda lambda) {
  return mu_w(problem.moments(w), problem.mu_tilde(), lambda);
}

double mu_w(const SigmoidWeight& w, const CapoProblem& problem, Lambda lambda) {
  return mu_w(problem.moments(std::function<double(double)>(w)), problem.mu_tilde(), lambda);
}

double mu_w(const std::function<double(double)>& w, const CapoProblem& problem, Lambda lambda) {
  return mu_w(problem.moments(w), problem.mu_tilde(), lambda);
}

SensitivityBound capo_bounds_grid(const CapoProblem& problem, Lambda lambda) {
  if (problem.thresholds().empty()) throw InputError("grid search: empty threshold set");
  if (lambda.is_unit()) return collapsed(problem.mu_tilde(), BoundOptimizer::kGrid);
  SensitivityBound b;
  b.mu_tilde = problem.mu_tilde();
  b.lambda = lambda.value();
  b.optimizer = BoundOptimizer::kGrid;
  b.lower = kInf;
  b.upper = -kInf;
  for (double c : problem.thresholds()) {
    const double up = mu_w(StepWeight{c, Direction::kNonDecreasing}, problem, lambda);
    const double lo = mu_w(StepWeight{c, Direction::kNonIncreasing}, problem, lambda);
    if (up > b.upper) {
      b.upper = up;
      b.argmax_threshold = c;
    }
    if (lo < b.lower) {
      b.lower = lo;
      b.argmin_threshold = c;
    }
  }
  include_empty_weighting(b);
  return b;
}

SensitivityBound capo_bounds_line(const CapoProblem& problem, Lambda lambda) {
  if (problem.thresholds().empty()) throw InputError("line search: empty threshold set");
  if (lambda.is_unit()) return collapsed(problem.mu_tilde(), BoundOptimizer::kLine);
  SensitivityBound b;
  b.mu_tilde = problem.mu_tilde();
  b.lambda = lambda.value();
  b.optimizer = BoundOptimizer::kLine;
  b.lower = kInf;
  b.upper = -kInf;
  for (double c : problem.thresholds()) {
    const double k = mu_w(StepWeight{c, Direction::kNonIncreasing}, problem, lambda);
    if (k < b.lower) {
      b.lower = k;
      b.argmin_threshold = c;
    } else if (k > b.lower) {
      break;
    }
  }
  for (double c : problem.thresholds()) {
    const double k = mu_w(StepWeight{c, Direction::kNonDecreasing}, problem, lambda);
    if (k > b.upper) {
      b.upper = k;
      b.argmax_threshold = c;
    } else if (k < b.upper) {
      break;
    }
  }
  include_empty_weighting(b);
  return b;
}

namespace {

struct RelaxedResult {
  double value;      // standardized objective A / B
  double y_star;     // standardized
  bool converged;
};

// Gradient steps on omega = (y*, s) for the sigmoid-relaxed objective
// g = sum p w (v - m) / (gamma + sum p w) in standardized units. sign = -1
// minimizes (lower bound), +1 maximizes (upper bound).
RelaxedResult relaxed_search(std::span<const double> v, std::span<const double> p, double m,
                             double gamma, Direction dir, double y_star0,
                             const GradientOptions& opts) {
  const double sign = dir == Direction::kNonDecreasing ? 1.0 : -1.0;
  const double d = sign;  // z = d (v - y*) / tau
  double y_star = y_star0, s = 0.0;
  RelaxedResult best{sign > 0 ? -kInf : kInf, y_star, false};
  for (int it = 0; it < opts.max_iters; ++it) {
    const double tau = softplus(s) + opts.zeta;
    const double dtau = logistic(s);
    double a = 0.0, b = gamma, da_y = 0.0, db_y = 0.0, da_s = 0.0, db_s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double z = d * (v[i] - y_star) / tau;
      const double w = logistic(z);
      const double dw = w * (1.0 - w);
      const double dw_y = dw * (-d / tau);
      const double dw_s = dw * (-z / tau) * dtau;
      const double c = v[i] - m;
      a += p[i] * w * c;
      b += p[i] * w;
      da_y += p[i] * dw_y * c;
      db_y += p[i] * dw_y;
      da_s += p[i] * dw_s * c;
      db_s += p[i] * dw_s;
    }
    const double g = a / b;
    if (!std::isfinite(g)) throw NumericError("gradient search: non-finite relaxed objective");
    if ((sign > 0 && g > best.value) || (sign < 0 && g < best.value)) {
      best.value = g;
      best.y_star = y_star;
    }
    const double gy = (da_y * b - a * db_y) / (b * b);
    const double gs = (da_s * b - a * db_s) / (b * b);
    const double step_y = sign * opts.learning_rate * gy;
    const double step_s = sign * opts.learning_rate * gs;
    y_star += step_y;
    s += step_s;
    if (std::hypot(step_y, step_s) <= opts.tolerance) {
      best.converged = true;
      break;
    }
  }
  return best;
}

}  // namespace

SensitivityBound capo_bounds_gradient(const CapoProblem& problem, Lambda lambda,
                                      const GradientOptions& opts) {
  if (lambda.is_unit()) return collapsed(problem.mu_tilde(), BoundOptimizer::kGradient);
  if (opts.init_quantiles.empty() || opts.max_iters < 1 || !(opts.learning_rate > 0.0) ||
      !(opts.zeta > 0.0)) {
    throw InputError("gradient options: need restarts, max_iters >= 1, lr > 0, zeta > 0");
  }
  const WeightedSupport& sup = problem.support();
  const double centre = sup.mean();
  double scale = sup.stddev();
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<double> v(sup.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (sup.points()[i] - centre) / scale;
  const double m = (problem.mu_tilde() - centre) / scale;
  const double gamma = lambda.gamma();

  SensitivityBound b;
  b.mu_tilde = problem.mu_tilde();
  b.lambda = lambda.value();
  b.optimizer = BoundOptimizer::kGradient;
  b.lower = kInf;
  b.upper = -kInf;
  for (double q : opts.init_quantiles) {
    const double start = (sup.quantile(q) - centre) / scale;
    const auto lo = relaxed_search(v, sup.probs(), m, gamma, Direction::kNonIncreasing, start, opts);
    const auto hi = relaxed_search(v, sup.probs(), m, gamma, Direction::kNonDecreasing, start, opts);
    b.converged = b.converged && lo.converged && hi.converged;
    const double lo_val = problem.mu_tilde() + scale * lo.value;
    const double hi_val = problem.mu_tilde() + scale * hi.value;
    if (lo_val < b.lower) {
      b.lower = lo_val;
      b.argmin_threshold = centre + scale * lo.y_star;
    }
    if (hi_val > b.upper) {
      b.upper = hi_val;
      b.argmax_threshold = centre + scale * hi.y_star;
    }
  }
  include_empty_weighting(b);
  return b;
}

SensitivityBound capo_bounds(const CapoProblem& problem, Lambda lambda, const BoundSpec& spec) {
  switch (spec.optimizer) {
    case BoundOptimizer::kGrid: return capo_bounds_grid(problem, lambda);
    case BoundOptimizer::kLine: return capo_bounds_line(problem, lambda);
    case BoundOptimizer::kGradient: return capo_bounds_gradient(problem, lambda, spec.gradient);
  }
  return capo_bounds_grid(problem, lambda);
}

// ---------------------------------------------------------------------------
// Model-level entry points

std::uint64_t problem_seed(const BoundSpec& spec, std::span<const double> x, double t) {
  std::uint64_t h = splitmix64(spec.seed);
  for (double v : x) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return splitmix64(h ^ std::bit_cast<std::uint64_t>(t));
}

CapoProblem make_problem(const ConditionalDensityModel& model, std::span<const double> x,
                         double t, const BoundSpec& spec) {
  return CapoProblem::from_mixture(model.evaluate(x, t), spec, problem_seed(spec, x, t));
}

namespace {

SensitivityBound model_bounds(const ConditionalDensityModel& model, std::span<const double> x,
                              double t, Lambda lambda, const BoundSpec& spec,
                              BoundOptimizer opt) {
  if (lambda.is_unit()) {
    return collapsed(conditional_mean(model.evaluate(x, t)), opt);
  }
  BoundSpec s = spec;
  s.optimizer = opt;
  return capo_bounds(make_problem(model, x, t, spec), lambda, s);
}

}  // namespace

SensitivityBound capo_bounds_grid(const ConditionalDensityModel& model, std::span<const double> x,
                                  double t, Lambda lambda, const BoundSpec& spec) {
  return model_bounds(model, x, t, lambda, spec, BoundOptimizer::kGrid);
}

SensitivityBound capo_bounds_line(const ConditionalDensityModel& model, std::span<const double> x,
                                  double t, Lambda lambda, const BoundSpec& spec) {
  return model_bounds(model, x, t, lambda, spec, BoundOptimizer::kLine);
}

SensitivityBound capo_bounds_gradient(const ConditionalDensityModel& model,
                                      std::span<const double> x, double t, Lambda lambda,
                                      const BoundSpec& spec) {
  return model_bounds(model, x, t, lambda, spec, BoundOptimizer::kGradient);
}

SensitivityBound capo_bounds(const ConditionalDensityModel& model, std::span<const double> x,
                             double t, Lambda lambda, const BoundSpec& spec) {
  return model_bounds(model, x, t, lambda, spec, spec.optimizer);
}

std::vector<SensitivityBound> capo_bounds_sweep(const ConditionalDensityModel& model,
                                                std::span<const double> x, double t,
                                                std::span<const double> lambdas,
                                                const BoundSpec& spec) {
  const CapoProblem problem = make_problem(model, x, t, spec);
  std::vector<SensitivityBound> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(capo_bounds(problem, Lambda(l), spec));
  return out;
}

std::vector<SensitivityBound> apo_bounds_sweep(const ConditionalDensityModel& model,
                                               std::span<const double> xs, double t,
                                               std::span<const double> lambdas,
                                               const BoundSpec& spec) {
  const std::size_t d = model.input_dim();
  if (xs.empty()) throw InputError("apo_bounds: empty covariate set");
  if (xs.size() % d != 0) throw InputError("apo_bounds: covariate array is not a multiple of dim");
  const std::size_t n = xs.size() / d;
  std::vector<SensitivityBound> out(lambdas.size());
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    out[k].lambda = Lambda(lambdas[k]).value();
    out[k].optimizer = spec.optimizer;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto bounds = capo_bounds_sweep(model, xs.subspan(i * d, d), t, lambdas, spec);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      out[k].lower += bounds[k].lower;
      out[k].upper += bounds[k].upper;
      out[k].mu_tilde += bounds[k].mu_tilde;
      out[k].converged = out[k].converged && bounds[k].converged;
    }
  }
  for (auto& b : out) {
    b.lower /= static_cast<double>(n);
    b.upper /= static_cast<double>(n);
    b.mu_tilde /= static_cast<double>(n);
    b.argmin_threshold = std::numeric_limits<double>::quiet_NaN();
    b.argmax_threshold = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

SensitivityBound apo_bounds(const ConditionalDensityModel& model, std::span<const double> xs,
                            double t, Lambda lambda, const BoundSpec& spec) {
  const double l = lambda.value();
  return apo_bounds_sweep(model, xs, t, std::span<const double>(&l, 1), spec).front();
}

double rho(const CapoProblem& problem, Lambda lambda, const BoundSpec& spec, Lambda proxy) {
  const double denom = capo_bounds(problem, proxy, spec).width();
  if (!(denom > 0.0)) {
    throw DegenerateError("rho: interval width at the Lambda proxy is zero (no outcome spread)");
  }
  const double num = capo_bounds(problem, lambda, spec).width();
  return std::clamp(num / denom, 0.0, 1.0);
}

double rho(const ConditionalDensityModel& model, std::span<const double> x, double t,
           Lambda lambda, const BoundSpec& spec, Lambda proxy) {
  return rho(make_problem(model, x, t, spec), lambda, spec, proxy);
}

KlDiagnostic kl_diagnostic(const MixtureDensity& nominal, const MixtureDensity& marginal,
                           Lambda lambda) {
  nominal.validate();
  marginal.validate();
  double lo = kInf, hi = -kInf;
  for (const auto* mix : {&nominal, &marginal}) {
    for (std::size_t j = 0; j < mix->size(); ++j) {
      const double sd = std::sqrt(mix->variances[j]);
      lo = std::min(lo, mix->means[j] - 12.0 * sd);
      hi = std::max(hi, mix->means[j] + 12.0 * sd);
    }
  }
  auto integrand = [&](double y) {
    const double lp = log_density(nominal, y);
    const double lq = log_density(marginal, y);
    const double p = std::exp(lp);
    if (p > 1e-12 && lq < -745.0) {
      throw SupportError("kl_diagnostic: reference density vanishes at y = " + std::to_string(y));
    }
    if (p == 0.0) return 0.0;
    return p * (lp - lq);
  };
  double err = 0.0;
  const double kl = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, lo, hi, 20, 1e-13, &err);
  return {kl, kl <= std::log(lambda.value())};
}

}  // namespace doseband
