#include "doseband/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "doseband/error.hpp"

namespace doseband {

namespace {

// Orthonormal Hermite polynomials with respect to exp(-y^2):
// returns {p_m(y), p_{m-1}(y)}.
std::pair<double, double> orthonormal_hermite(int m, double y) {
  double prev = 0.0;
  double cur = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int j = 1; j <= m; ++j) {
    const double next = std::sqrt(2.0 / j) * y * cur - std::sqrt((j - 1.0) / j) * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

}  // namespace

GaussHermiteRule hermite_rule(int m) {
  if (m < 1 || m > kMaxHermiteOrder) {
    throw InputError("hermite_rule: order must be in [1, " + std::to_string(kMaxHermiteOrder) +
                     "], got " + std::to_string(m));
  }
  GaussHermiteRule rule;
  rule.order = m;
  if (m == 1) {
    rule.nodes = {0.0};
    rule.weights = {std::sqrt(std::numbers::pi)};
    return rule;
  }

  // Golub-Welsch: eigenvalues of the Jacobi matrix seed the roots.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int i = 1; i < m; ++i) sub(i - 1) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  std::vector<double> roots(solver.eigenvalues().data(), solver.eigenvalues().data() + m);
  std::sort(roots.begin(), roots.end());

  // Newton polishing on the three-term recurrence; p_m' = sqrt(2m) p_{m-1}.
  const double d_scale = std::sqrt(2.0 * m);
  for (double& r : roots) {
    for (int it = 0; it < 8; ++it) {
      const auto [pm, pm1] = orthonormal_hermite(m, r);
      const double step = pm / (d_scale * pm1);
      r -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(r))) break;
    }
  }
  for (int i = 0; i < m / 2; ++i) {
    const double a = 0.5 * (roots[static_cast<std::size_t>(m - 1 - i)] - roots[static_cast<std::size_t>(i)]);
    roots[static_cast<std::size_t>(i)] = -a;
    roots[static_cast<std::size_t>(m - 1 - i)] = a;
  }
  if (m % 2 == 1) roots[static_cast<std::size_t>(m / 2)] = 0.0;

  // g_i = 2^{m-1} m! sqrt(pi) / (m^2 H_{m-1}(y_i)^2), which in orthonormal
  // form is 1 / (m p_{m-1}(y_i)^2).
  rule.nodes = roots;
  rule.weights.resize(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const double pm1 = orthonormal_hermite(m, roots[i]).second;
    rule.weights[i] = 1.0 / (m * pm1 * pm1);
  }
  for (int i = 0; i < m / 2; ++i) {
    auto& lo = rule.weights[static_cast<std::size_t>(i)];
    auto& hi = rule.weights[static_cast<std::size_t>(m - 1 - i)];
    lo = hi = 0.5 * (lo + hi);
  }
  return rule;
}

IntegrandSamples evaluate_integrand(const Integrand& h, std::vector<double> points) {
  IntegrandSamples out;
  out.values.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = h(points[i]);
    if (!std::isfinite(v)) {
      throw NumericError("integrand is not finite at sample " + std::to_string(i) +
                         " (y = " + std::to_string(points[i]) + ")");
    }
    out.values[i] = v;
  }
  out.points = std::move(points);
  return out;
}

McEstimate mc_estimate(const Integrand& h, const MixtureDensity& mix, std::size_t m,
                       std::mt19937_64& rng) {
  if (m < 1) throw InputError("mc_expect: need at least one sample");
  const IntegrandSamples s = evaluate_integrand(h, sample(mix, m, rng));
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  const double denom = m > 1 ? static_cast<double>(m - 1) : 1.0;
  return {mean, std::sqrt(var / denom / static_cast<double>(m))};
}

double mc_expect(const Integrand& h, const MixtureDensity& mix, std::size_t m,
                 std::mt19937_64& rng) {
  return mc_estimate(h, mix, m, rng).mean;
}

double gh_expect_gaussian(const Integrand& h, double mu, double sigma,
                          const GaussHermiteRule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * h(std::numbers::sqrt2 * sigma * rule.nodes[i] + mu);
  }
  return acc / std::sqrt(std::numbers::pi);
}

double gh_expect_mixture(const Integrand& h, const MixtureDensity& mix,
                         const GaussHermiteRule& rule) {
  double acc = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] == 0.0) continue;
    acc += mix.weights[j] * gh_expect_gaussian(h, mix.means[j], std::sqrt(mix.variances[j]), rule);
  }
  return acc;
}

void gh_mixture_nodes(const MixtureDensity& mix, const GaussHermiteRule& rule,
                      std::vector<double>& points, std::vector<double>& probs) {
  points.clear();
  probs.clear();
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] == 0.0) continue;
    const double sigma = std::sqrt(mix.variances[j]);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      points.push_back(std::numbers::sqrt2 * sigma * rule.nodes[i] + mix.means[j]);
      probs.push_back(mix.weights[j] * rule.weights[i] * inv_sqrt_pi);
    }
  }
}

}  // namespace doseband
