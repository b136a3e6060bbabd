#pragma once

// Conditional Gaussian-mixture density model p(y | t, x).
//
// A residual leaky feed-forward extractor phi(x) feeds, together with the
// treatment, a single hidden "density block" whose output drives three linear
// heads: mixture logits, component means and pre-softplus scales. Inputs and
// outputs are standardized with training statistics stored in the model;
// evaluate() reports mixtures in outcome units.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace doseband {

enum class Optimizer { kSgd, kAdam };

struct DensityModelConfig {
  int hidden_units = 96;
  int depth = 4;
  int n_components = 24;
  double negative_slope = 0.05;
  double learning_rate = 0.0015;
  int batch_size = 32;
  int epochs = 500;
  double sigma_floor = 1e-3;  // standardized outcome units
  std::uint64_t seed = 1331;
  Optimizer optimizer = Optimizer::kSgd;

  void validate() const;
};

struct MixtureDensity {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t size() const { return weights.size(); }
  void validate() const;

  static MixtureDensity gaussian(double mean, double variance);
};

double log_density(const MixtureDensity& mix, double y);
double conditional_mean(const MixtureDensity& mix);

// Draws m values: component j with probability weights[j], then N(mean_j, var_j).
std::vector<double> sample(const MixtureDensity& mix, std::size_t m, std::mt19937_64& rng);

// Same draws as sample(), also reporting which component produced each value.
std::vector<double> sample(const MixtureDensity& mix, std::size_t m, std::mt19937_64& rng,
                           std::vector<std::size_t>& components);

// Column-oriented observational data. x is row-major n x dim.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> u;  // optional; empty when absent

  std::size_t size() const { return t.size(); }
  bool has_u() const { return !u.empty(); }
  std::span<const double> row_x(std::size_t i) const {
    return {x.data() + i * dim, dim};
  }
  void push_back(std::span<const double> xi, double ti, double yi);
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct Standardization {
  std::vector<double> x_mean, x_scale;
  double t_mean = 0.0, t_scale = 1.0;
  double y_mean = 0.0, y_scale = 1.0;

  static Standardization fit(const Dataset& data);
};

class ConditionalDensityModel {
 public:
  ConditionalDensityModel(DensityModelConfig config, std::size_t input_dim,
                          Standardization stats);

  const DensityModelConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  const Standardization& standardization() const { return stats_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // Head biases/weights for the mixture logits; exposed for tests that pin
  // the softmax input.
  std::span<double> logit_head();

  // Mixture in outcome units at (x, t).
  MixtureDensity evaluate(std::span<const double> x, double t) const;
  // Mixture in standardized outcome units; sigma >= sigma_floor holds here.
  MixtureDensity evaluate_standardized(std::span<const double> x, double t) const;

  // Mean negative log-likelihood in standardized units: the training loss.
  double batch_loss(const Dataset& batch) const;
  // Analytic gradient of batch_loss with respect to parameters().
  std::vector<double> nll_gradient(const Dataset& batch) const;

  // Mean NLL in outcome units.
  double mean_nll(const Dataset& data) const;

  std::uint64_t digest() const;

  nlohmann::json to_json() const;
  static ConditionalDensityModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ConditionalDensityModel load(const std::string& path);

 private:
  void check_input(std::span<const double> x, double t) const;

  DensityModelConfig config_;
  std::size_t input_dim_;
  Standardization stats_;
  std::vector<double> params_;
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;
};

// Mini-batch maximum-likelihood training with a seeded fixed shuffle order.
ConditionalDensityModel train(const Dataset& data, const DensityModelConfig& config,
                              TrainReport* report = nullptr);

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);

nlohmann::json to_json(const DensityModelConfig& config);
DensityModelConfig config_from_json(const nlohmann::json& j);

}  // namespace doseband
