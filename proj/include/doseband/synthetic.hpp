#pragma once

// Synthetic structural causal model with a hidden binary confounder u:
//
//   u ~ Bern(0.5),  x ~ Unif[0.1, 2],
//   k ~ BetaBinomial(bb_n, alpha = x + gamma_t u, beta = 1),  t = k / bb_n,
//   y = t + x exp(-t x) - gamma_y (u - 0.5)(0.5 x + 1) + N(0, noise_var).
//
// Because u is simulated, the potential-outcome means and the density ratio
// lambda*(t, x, u) = E_u[p(t | x, u)] / p(t | x, u) are known exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "doseband/density.hpp"

namespace doseband {

struct SyntheticConfig {
  std::size_t n = 1000;
  double gamma_t = 0.3;
  double gamma_y = 0.5;
  double noise_var = 0.04;
  int bb_n = 100;
  std::uint64_t seed = 1331;

  void validate() const;
};

inline constexpr double kXMin = 0.1;
inline constexpr double kXMax = 2.0;

double log_beta_binomial_pmf(int k, int n, double alpha, double beta);
double beta_binomial_pmf(int k, int n, double alpha, double beta);

// Dataset with dim 1 and a populated u column.
Dataset generate(const SyntheticConfig& config);

double true_capo(double x, double t);
double true_capo_given_u(double x, double t, double u, double gamma_y);
double true_apo(double t);

// Throws InputError if t * bb_n is not an integer (within 1e-9).
double lambda_star(double t, double x, int u, const SyntheticConfig& config);

inline bool within_sensitivity(double lambda_star_value, double lambda) {
  return 1.0 / lambda <= lambda_star_value && lambda_star_value <= lambda;
}

struct OracleRow {
  double x = 0.0, t = 0.0;
  int u = 0;
  double capo_u = 0.0, capo = 0.0, lambda_star = 0.0;
};

// Oracle values for every row of data. When treatments is non-empty each
// (x, u) pair is expanded across those treatment levels instead of using the
// observed t.
std::vector<OracleRow> oracle_rows(const Dataset& data, const SyntheticConfig& config,
                                   const std::vector<double>& treatments = {});

}  // namespace doseband
