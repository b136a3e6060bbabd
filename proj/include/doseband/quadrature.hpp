#pragma once

// Estimators of E_{p(y|t,x)}[h(y)] for a Gaussian-mixture density.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "doseband/density.hpp"

namespace doseband {

using Integrand = std::function<double(double)>;

// Nodes and weights of the order-m Gauss-Hermite rule for the weight exp(-y^2).
struct GaussHermiteRule {
  int order = 0;
  std::vector<double> nodes;    // ascending, symmetric about 0
  std::vector<double> weights;  // positive, sum to sqrt(pi)
};

constexpr int kMaxHermiteOrder = 128;

GaussHermiteRule hermite_rule(int m);

struct IntegrandSamples {
  std::vector<double> points;
  std::vector<double> values;
};

// Evaluates h at every point; throws NumericError naming the first index
// where h is not finite.
IntegrandSamples evaluate_integrand(const Integrand& h, std::vector<double> points);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

double mc_expect(const Integrand& h, const MixtureDensity& mix, std::size_t m, std::mt19937_64& rng);
McEstimate mc_estimate(const Integrand& h, const MixtureDensity& mix, std::size_t m,
                       std::mt19937_64& rng);

double gh_expect_gaussian(const Integrand& h, double mu, double sigma, const GaussHermiteRule& rule);
double gh_expect_mixture(const Integrand& h, const MixtureDensity& mix, const GaussHermiteRule& rule);

// The mixture Gauss-Hermite rule as a weighted point set: points
// sqrt(2) sigma_j node_i + mu_j with probabilities pi_j g_i / sqrt(pi).
void gh_mixture_nodes(const MixtureDensity& mix, const GaussHermiteRule& rule,
                      std::vector<double>& points, std::vector<double>& probs);

}  // namespace doseband
