#include "doseband/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doseband/error.hpp"

namespace doseband {

namespace {

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

int grid_index(double t, int bb_n) {
  const double scaled = t * bb_n;
  const double k = std::round(scaled);
  if (std::abs(scaled - k) > 1e-9 || k < 0 || k > bb_n) {
    throw InputError("treatment " + std::to_string(t) + " is not on the k/" +
                     std::to_string(bb_n) + " grid");
  }
  return static_cast<int>(k);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n < 1) throw InputError("synthetic: n must be >= 1");
  if (bb_n < 1) throw InputError("synthetic: bb_n must be >= 1");
  if (!(noise_var > 0.0)) throw InputError("synthetic: noise_var must be > 0");
  if (!(gamma_t >= 0.0)) throw InputError("synthetic: gamma_t must be >= 0");
  if (!std::isfinite(gamma_y)) throw InputError("synthetic: gamma_y must be finite");
}

double log_beta_binomial_pmf(int k, int n, double alpha, double beta) {
  if (n < 0 || k < 0 || k > n) {
    throw InputError("beta_binomial_pmf: need 0 <= k <= n");
  }
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InputError("beta_binomial_pmf: alpha and beta must be positive and finite");
  }
  const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return log_choose + log_beta(k + alpha, n - k + beta) - log_beta(alpha, beta);
}

double beta_binomial_pmf(int k, int n, double alpha, double beta) {
  return std::exp(log_beta_binomial_pmf(k, n, alpha, beta));
}

Dataset generate(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unif_x(kXMin, kXMax);
  std::gamma_distribution<double> gamma_b(1.0, 1.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_var));

  Dataset data;
  data.dim = 1;
  data.x.reserve(config.n);
  data.t.reserve(config.n);
  data.y.reserve(config.n);
  data.u.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const int u = coin(rng) ? 1 : 0;
    const double x = unif_x(rng);
    // Beta(alpha, 1) through a Gamma ratio, then Binomial.
    std::gamma_distribution<double> gamma_a(x + config.gamma_t * u, 1.0);
    const double ga = gamma_a(rng);
    const double gb = gamma_b(rng);
    const double p = ga / (ga + gb);
    std::binomial_distribution<int> binom(config.bb_n, p);
    const double t = static_cast<double>(binom(rng)) / config.bb_n;
    const double y = true_capo_given_u(x, t, u, config.gamma_y) + noise(rng);
    data.x.push_back(x);
    data.t.push_back(t);
    data.y.push_back(y);
    data.u.push_back(u);
  }
  return data;
}

double true_capo(double x, double t) { return t + x * std::exp(-t * x); }

double true_capo_given_u(double x, double t, double u, double gamma_y) {
  return true_capo(x, t) - gamma_y * (u - 0.5) * (0.5 * x + 1.0);
}

double true_apo(double t) {
  auto f = [t](double x) { return true_capo(x, t); };
  double err = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, kXMin, kXMax, 15, 1e-12, &err);
  return integral / (kXMax - kXMin);
}

double lambda_star(double t, double x, int u, const SyntheticConfig& config) {
  if (u != 0 && u != 1) throw InputError("lambda_star: u must be 0 or 1");
  const int k = grid_index(t, config.bb_n);
  const double p0 = beta_binomial_pmf(k, config.bb_n, x, 1.0);
  const double p1 = beta_binomial_pmf(k, config.bb_n, x + config.gamma_t, 1.0);
  const double pu = u == 0 ? p0 : p1;
  return (0.5 * p0 + 0.5 * p1) / pu;
}

std::vector<OracleRow> oracle_rows(const Dataset& data, const SyntheticConfig& config,
                                   const std::vector<double>& treatments) {
  if (!data.has_u()) throw InputError("oracle: dataset has no u column");
  if (data.dim != 1) throw InputError("oracle: synthetic data has one covariate");
  std::vector<OracleRow> rows;
  auto emit = [&](double x, double t, double u) {
    OracleRow r;
    r.x = x;
    r.t = t;
    r.u = static_cast<int>(u);
    r.capo_u = true_capo_given_u(x, t, u, config.gamma_y);
    r.capo = true_capo(x, t);
    r.lambda_star = lambda_star(t, x, r.u, config);
    rows.push_back(r);
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (treatments.empty()) {
      emit(data.x[i], data.t[i], data.u[i]);
    } else {
      for (double t : treatments) emit(data.x[i], t, data.u[i]);
    }
  }
  return rows;
}

}  // namespace doseband
