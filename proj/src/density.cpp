#include "doseband/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "doseband/error.hpp"
#include "doseband/hash.hpp"

namespace doseband {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using Map = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
constexpr int kFormatVersion = 1;

struct Dense {
  std::size_t w = 0, b = 0;  // offsets into the flat parameter vector
  std::size_t rows = 0, cols = 0;
};

struct Layout {
  std::vector<Dense> extractor;  // first maps dim -> hidden, rest are residual
  Dense block;                   // [phi; t] -> hidden
  Dense logits, means, scales;   // hidden -> n_components each
  std::size_t total = 0;
};

Layout make_layout(const DensityModelConfig& cfg, std::size_t dim) {
  Layout out;
  std::size_t off = 0;
  auto add = [&off](std::size_t rows, std::size_t cols) {
    Dense d{off, off + rows * cols, rows, cols};
    off += rows * cols + rows;
    return d;
  };
  const auto h = static_cast<std::size_t>(cfg.hidden_units);
  const auto k = static_cast<std::size_t>(cfg.n_components);
  out.extractor.push_back(add(h, dim));
  for (int l = 1; l < cfg.depth; ++l) out.extractor.push_back(add(h, h));
  out.block = add(h, h + 1);
  out.logits = add(k, h);
  out.means = add(k, h);
  out.scales = add(k, h);
  out.total = off;
  return out;
}

ConstMap weights(std::span<const double> p, const Dense& d) {
  return {p.data() + d.w, static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols)};
}
ConstVecMap bias(std::span<const double> p, const Dense& d) {
  return {p.data() + d.b, static_cast<Eigen::Index>(d.rows)};
}
Map weights(std::span<double> p, const Dense& d) {
  return {p.data() + d.w, static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols)};
}
VecMap bias(std::span<double> p, const Dense& d) {
  return {p.data() + d.b, static_cast<Eigen::Index>(d.rows)};
}

double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double logistic(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

MatrixXd leaky(const MatrixXd& pre, double slope) {
  return pre.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
}
MatrixXd leaky_grad(const MatrixXd& pre, double slope) {
  return pre.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; });
}

// Standardized inputs for a batch, one column per row.
struct Inputs {
  MatrixXd x;  // dim x B
  Eigen::RowVectorXd t;
  Eigen::RowVectorXd y;
};

Inputs standardize(const Dataset& data, const Standardization& s) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.dim);
  Inputs in{MatrixXd(d, n), Eigen::RowVectorXd(n), Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = data.row_x(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) {
      in.x(j, i) = (xi[static_cast<std::size_t>(j)] - s.x_mean[static_cast<std::size_t>(j)]) /
                   s.x_scale[static_cast<std::size_t>(j)];
    }
    in.t(i) = (data.t[static_cast<std::size_t>(i)] - s.t_mean) / s.t_scale;
    in.y(i) = (data.y[static_cast<std::size_t>(i)] - s.y_mean) / s.y_scale;
  }
  return in;
}

struct Forward {
  std::vector<MatrixXd> pre;  // extractor pre-activations
  std::vector<MatrixXd> act;  // extractor outputs
  MatrixXd block_in, block_pre, z;
  MatrixXd logits, means, scale_pre;
};

Forward run_forward(const Layout& lay, std::span<const double> p, const DensityModelConfig& cfg,
                    const MatrixXd& x, const Eigen::RowVectorXd& t) {
  Forward f;
  const double slope = cfg.negative_slope;
  for (std::size_t l = 0; l < lay.extractor.size(); ++l) {
    const auto& d = lay.extractor[l];
    const MatrixXd& in = l == 0 ? x : f.act.back();
    MatrixXd pre = (weights(p, d) * in).colwise() + bias(p, d);
    MatrixXd a = leaky(pre, slope);
    if (l > 0) a += in;
    f.pre.push_back(std::move(pre));
    f.act.push_back(std::move(a));
  }
  const auto hidden = f.act.back().rows();
  f.block_in.resize(hidden + 1, x.cols());
  f.block_in.topRows(hidden) = f.act.back();
  f.block_in.bottomRows(1) = t;
  f.block_pre = (weights(p, lay.block) * f.block_in).colwise() + bias(p, lay.block);
  f.z = leaky(f.block_pre, slope);
  f.logits = (weights(p, lay.logits) * f.z).colwise() + bias(p, lay.logits);
  f.means = (weights(p, lay.means) * f.z).colwise() + bias(p, lay.means);
  f.scale_pre = (weights(p, lay.scales) * f.z).colwise() + bias(p, lay.scales);
  return f;
}

// Mean NLL over the batch; accumulates d(loss)/d(params) into grad if given.
double loss_and_gradient(const Layout& lay, std::span<const double> p,
                         const DensityModelConfig& cfg, const Inputs& in,
                         std::span<double> grad) {
  const Forward f = run_forward(lay, p, cfg, in.x, in.t);
  const Eigen::Index k = f.logits.rows();
  const Eigen::Index n = f.logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_grad = !grad.empty();

  MatrixXd g_logits, g_means, g_scales;
  if (want_grad) {
    g_logits.resize(k, n);
    g_means.resize(k, n);
    g_scales.resize(k, n);
  }
  std::vector<double> log_pi(static_cast<std::size_t>(k)), comp(static_cast<std::size_t>(k));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lmax = f.logits.col(i).maxCoeff();
    double lse = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) lse += std::exp(f.logits(j, i) - lmax);
    lse = lmax + std::log(lse);
    const double y = in.y(i);
    double cmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double sigma = softplus(f.scale_pre(j, i)) + cfg.sigma_floor;
      const double r = (y - f.means(j, i)) / sigma;
      log_pi[ju] = f.logits(j, i) - lse;
      comp[ju] = log_pi[ju] - kLogSqrt2Pi - std::log(sigma) - 0.5 * r * r;
      cmax = std::max(cmax, comp[ju]);
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) acc += std::exp(comp[static_cast<std::size_t>(j)] - cmax);
    const double log_p = cmax + std::log(acc);
    total -= log_p;
    if (!want_grad) continue;
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double resp = std::exp(comp[ju] - log_p);
      const double pi = std::exp(log_pi[ju]);
      const double sigma = softplus(f.scale_pre(j, i)) + cfg.sigma_floor;
      const double diff = y - f.means(j, i);
      g_logits(j, i) = (pi - resp) * inv_n;
      g_means(j, i) = -resp * diff / (sigma * sigma) * inv_n;
      const double d_sigma = -resp * (diff * diff / (sigma * sigma * sigma) - 1.0 / sigma);
      g_scales(j, i) = d_sigma * logistic(f.scale_pre(j, i)) * inv_n;
    }
  }
  if (!want_grad) return total * inv_n;

  auto head = [&](const Dense& d, const MatrixXd& g) {
    weights(grad, d).noalias() += g * f.z.transpose();
    bias(grad, d) += g.rowwise().sum();
  };
  head(lay.logits, g_logits);
  head(lay.means, g_means);
  head(lay.scales, g_scales);
  MatrixXd dz = weights(p, lay.logits).transpose() * g_logits;
  dz.noalias() += weights(p, lay.means).transpose() * g_means;
  dz.noalias() += weights(p, lay.scales).transpose() * g_scales;

  MatrixXd d_pre = dz.cwiseProduct(leaky_grad(f.block_pre, cfg.negative_slope));
  weights(grad, lay.block).noalias() += d_pre * f.block_in.transpose();
  bias(grad, lay.block) += d_pre.rowwise().sum();
  const auto hidden = f.act.back().rows();
  MatrixXd da = (weights(p, lay.block).transpose() * d_pre).topRows(hidden);

  for (std::size_t l = lay.extractor.size(); l-- > 0;) {
    const auto& d = lay.extractor[l];
    const MatrixXd& layer_in = l == 0 ? in.x : f.act[l - 1];
    d_pre = da.cwiseProduct(leaky_grad(f.pre[l], cfg.negative_slope));
    weights(grad, d).noalias() += d_pre * layer_in.transpose();
    bias(grad, d) += d_pre.rowwise().sum();
    if (l > 0) da += weights(p, d).transpose() * d_pre;
  }
  return total * inv_n;
}

void init_params(const Layout& lay, std::span<double> p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&](const Dense& d) {
    const double limit = std::sqrt(6.0 / static_cast<double>(d.rows + d.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < d.rows * d.cols; ++i) p[d.w + i] = dist(rng);
    for (std::size_t i = 0; i < d.rows; ++i) p[d.b + i] = 0.0;
  };
  for (const auto& d : lay.extractor) fill(d);
  fill(lay.block);
  fill(lay.logits);
  fill(lay.means);
  fill(lay.scales);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and mixtures

void DensityModelConfig::validate() const {
  if (hidden_units < 1 || depth < 1 || n_components < 1 || batch_size < 1 || epochs < 0) {
    throw InputError("density config: counts must be >= 1 (epochs >= 0)");
  }
  if (!(negative_slope >= 0.0)) throw InputError("density config: negative_slope must be >= 0");
  if (!(learning_rate > 0.0)) throw InputError("density config: learning_rate must be > 0");
  if (!(sigma_floor > 0.0)) throw InputError("density config: sigma_floor must be > 0");
}

void MixtureDensity::validate() const {
  if (weights.empty() || means.size() != weights.size() || variances.size() != weights.size()) {
    throw InputError("mixture: weights, means and variances must be non-empty and equal length");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0 && weights[j] <= 1.0)) throw InputError("mixture: weight outside [0,1]");
    if (!(variances[j] > 0.0) || !std::isfinite(variances[j])) {
      throw InputError("mixture: variances must be positive and finite");
    }
    if (!std::isfinite(means[j])) throw InputError("mixture: non-finite mean");
    sum += weights[j];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("mixture: weights must sum to 1");
}

MixtureDensity MixtureDensity::gaussian(double mean, double variance) {
  MixtureDensity m{{1.0}, {mean}, {variance}};
  m.validate();
  return m;
}

double log_density(const MixtureDensity& mix, double y) {
  double cmax = -std::numeric_limits<double>::infinity();
  std::vector<double> comp(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] <= 0.0) {
      comp[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double r = y - mix.means[j];
    comp[j] = std::log(mix.weights[j]) - kLogSqrt2Pi - 0.5 * std::log(mix.variances[j]) -
              0.5 * r * r / mix.variances[j];
    cmax = std::max(cmax, comp[j]);
  }
  double acc = 0.0;
  for (double c : comp) acc += std::exp(c - cmax);
  return cmax + std::log(acc);
}

double conditional_mean(const MixtureDensity& mix) {
  double m = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) m += mix.weights[j] * mix.means[j];
  return m;
}

std::vector<double> sample(const MixtureDensity& mix, std::size_t m, std::mt19937_64& rng,
                           std::vector<std::size_t>& components) {
  std::discrete_distribution<std::size_t> pick(mix.weights.begin(), mix.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(m);
  components.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = mix.size() == 1 ? 0 : pick(rng);
    components[i] = j;
    out[i] = mix.means[j] + std::sqrt(mix.variances[j]) * normal(rng);
  }
  return out;
}

std::vector<double> sample(const MixtureDensity& mix, std::size_t m, std::mt19937_64& rng) {
  std::vector<std::size_t> components;
  return sample(mix, m, rng, components);
}

// ---------------------------------------------------------------------------
// Dataset

void Dataset::push_back(std::span<const double> xi, double ti, double yi) {
  if (size() == 0 && x.empty()) dim = xi.size();
  if (xi.size() != dim) throw InputError("dataset: covariate dimension mismatch");
  x.insert(x.end(), xi.begin(), xi.end());
  t.push_back(ti);
  y.push_back(yi);
}

void Dataset::validate() const {
  if (x.size() != size() * dim || y.size() != size()) {
    throw InputError("dataset: column lengths disagree");
  }
  if (has_u() && u.size() != size()) throw InputError("dataset: u column length mismatch");
  if (!all_finite(x) || !all_finite(t) || !all_finite(y) || !all_finite(u)) {
    throw InputError("dataset: non-finite value");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.dim = dim;
  out.x.reserve(rows.size() * dim);
  out.t.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw InputError("dataset: row index out of range");
    const auto xr = row_x(r);
    out.x.insert(out.x.end(), xr.begin(), xr.end());
    out.t.push_back(t[r]);
    out.y.push_back(y[r]);
    if (has_u()) out.u.push_back(u[r]);
  }
  return out;
}

Standardization Standardization::fit(const Dataset& data) {
  if (data.size() == 0) throw InputError("standardization: empty dataset");
  auto moments = [](auto&& get, std::size_t n) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += get(i);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (get(i) - mean) * (get(i) - mean);
    double scale = std::sqrt(var / static_cast<double>(n));
    if (!(scale > 1e-12)) scale = 1.0;
    return std::pair{mean, scale};
  };
  Standardization s;
  const std::size_t n = data.size();
  for (std::size_t j = 0; j < data.dim; ++j) {
    auto [m, sc] = moments([&](std::size_t i) { return data.x[i * data.dim + j]; }, n);
    s.x_mean.push_back(m);
    s.x_scale.push_back(sc);
  }
  std::tie(s.t_mean, s.t_scale) = moments([&](std::size_t i) { return data.t[i]; }, n);
  std::tie(s.y_mean, s.y_scale) = moments([&](std::size_t i) { return data.y[i]; }, n);
  return s;
}

// ---------------------------------------------------------------------------
// Model

ConditionalDensityModel::ConditionalDensityModel(DensityModelConfig config, std::size_t input_dim,
                                                 Standardization stats)
    : config_(config), input_dim_(input_dim), stats_(std::move(stats)) {
  config_.validate();
  if (input_dim_ == 0) throw InputError("model: input dimension must be >= 1");
  if (stats_.x_mean.size() != input_dim_ || stats_.x_scale.size() != input_dim_) {
    throw InputError("model: standardization dimension mismatch");
  }
  const Layout lay = make_layout(config_, input_dim_);
  params_.assign(lay.total, 0.0);
  init_params(lay, params_, config_.seed);
}

std::span<double> ConditionalDensityModel::logit_head() {
  const Layout lay = make_layout(config_, input_dim_);
  return std::span<double>(params_).subspan(lay.logits.w, lay.logits.rows * (lay.logits.cols + 1));
}

void ConditionalDensityModel::check_input(std::span<const double> x, double t) const {
  if (x.size() != input_dim_) {
    throw InputError("evaluate: expected " + std::to_string(input_dim_) + " covariates, got " +
                     std::to_string(x.size()));
  }
  if (!all_finite(x) || !std::isfinite(t)) throw InputError("evaluate: non-finite input");
}

MixtureDensity ConditionalDensityModel::evaluate_standardized(std::span<const double> x,
                                                              double t) const {
  check_input(x, t);
  const Layout lay = make_layout(config_, input_dim_);
  MatrixXd xs(static_cast<Eigen::Index>(input_dim_), 1);
  for (std::size_t j = 0; j < input_dim_; ++j) {
    xs(static_cast<Eigen::Index>(j), 0) = (x[j] - stats_.x_mean[j]) / stats_.x_scale[j];
  }
  Eigen::RowVectorXd ts(1);
  ts(0) = (t - stats_.t_mean) / stats_.t_scale;
  const Forward f = run_forward(lay, params_, config_, xs, ts);

  const auto k = static_cast<std::size_t>(config_.n_components);
  MixtureDensity mix;
  mix.weights.resize(k);
  mix.means.resize(k);
  mix.variances.resize(k);
  const double lmax = f.logits.col(0).maxCoeff();
  double norm = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    mix.weights[j] = std::exp(f.logits(static_cast<Eigen::Index>(j), 0) - lmax);
    norm += mix.weights[j];
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto ji = static_cast<Eigen::Index>(j);
    mix.weights[j] /= norm;
    mix.means[j] = f.means(ji, 0);
    const double sigma = std::max(softplus(f.scale_pre(ji, 0)) + config_.sigma_floor,
                                  config_.sigma_floor);
    mix.variances[j] = sigma * sigma;
  }
  if (!all_finite(mix.means)) throw NumericError("evaluate: non-finite component mean");
  return mix;
}

MixtureDensity ConditionalDensityModel::evaluate(std::span<const double> x, double t) const {
  MixtureDensity mix = evaluate_standardized(x, t);
  const double s = stats_.y_scale;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    mix.means[j] = mix.means[j] * s + stats_.y_mean;
    mix.variances[j] *= s * s;
  }
  return mix;
}

double ConditionalDensityModel::batch_loss(const Dataset& batch) const {
  if (batch.size() == 0) throw InputError("batch_loss: empty batch");
  if (batch.dim != input_dim_) throw InputError("batch_loss: dimension mismatch");
  const Layout lay = make_layout(config_, input_dim_);
  return loss_and_gradient(lay, params_, config_, standardize(batch, stats_), {});
}

std::vector<double> ConditionalDensityModel::nll_gradient(const Dataset& batch) const {
  if (batch.size() == 0) throw InputError("nll_gradient: empty batch");
  if (batch.dim != input_dim_) throw InputError("nll_gradient: dimension mismatch");
  const Layout lay = make_layout(config_, input_dim_);
  std::vector<double> grad(params_.size(), 0.0);
  loss_and_gradient(lay, params_, config_, standardize(batch, stats_), grad);
  return grad;
}

double ConditionalDensityModel::mean_nll(const Dataset& data) const {
  return batch_loss(data) + std::log(stats_.y_scale);
}

std::uint64_t ConditionalDensityModel::digest() const {
  Fnv1a h;
  h.update(params_);
  h.update(stats_.x_mean);
  h.update(stats_.x_scale);
  for (double v : {stats_.t_mean, stats_.t_scale, stats_.y_mean, stats_.y_scale}) h.update(v);
  return h.value();
}

// ---------------------------------------------------------------------------
// Training

ConditionalDensityModel train(const Dataset& data, const DensityModelConfig& config,
                              TrainReport* report) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw InputError("train: empty dataset");

  ConditionalDensityModel model(config, data.dim, Standardization::fit(data));
  const Layout lay = make_layout(config, data.dim);
  const Inputs all = standardize(data, model.standardization());
  std::span<double> p = model.parameters();

  const double initial = loss_and_gradient(lay, p, config, all, {});
  if (report) {
    report->initial_loss = initial;
    report->epoch_losses.clear();
  }

  const std::size_t n = data.size();
  const auto batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(config.seed, 0xba7c4));

  std::vector<double> grad(p.size());
  std::vector<double> m1, m2;
  if (config.optimizer == Optimizer::kAdam) {
    m1.assign(p.size(), 0.0);
    m2.assign(p.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::uint64_t step = 0;

  Inputs mb{MatrixXd(all.x.rows(), 0), {}, {}};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const auto b = static_cast<Eigen::Index>(end - start);
      mb.x.resize(all.x.rows(), b);
      mb.t.resize(b);
      mb.y.resize(b);
      for (Eigen::Index c = 0; c < b; ++c) {
        const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(c)]);
        mb.x.col(c) = all.x.col(src);
        mb.t(c) = all.t(src);
        mb.y(c) = all.y(src);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = loss_and_gradient(lay, p, config, mb, grad);
      if (!std::isfinite(loss) || !all_finite(grad)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch), epoch);
      }
      ++step;
      if (config.optimizer == Optimizer::kSgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * grad[i];
      } else {
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        for (std::size_t i = 0; i < p.size(); ++i) {
          m1[i] = kBeta1 * m1[i] + (1 - kBeta1) * grad[i];
          m2[i] = kBeta2 * m2[i] + (1 - kBeta2) * grad[i] * grad[i];
          p[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + kEps);
        }
      }
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch), epoch);
    }
    if (report) report->epoch_losses.push_back(epoch_loss);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_string(Optimizer opt) { return opt == Optimizer::kSgd ? "sgd" : "adam"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw InputError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

nlohmann::json to_json(const DensityModelConfig& c) {
  return {{"hidden_units", c.hidden_units}, {"depth", c.depth},
          {"n_components", c.n_components}, {"negative_slope", c.negative_slope},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"sigma_floor", c.sigma_floor},
          {"seed", c.seed},                   {"optimizer", to_string(c.optimizer)}};
}

DensityModelConfig config_from_json(const nlohmann::json& j) {
  DensityModelConfig c;
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.depth = j.value("depth", c.depth);
  c.n_components = j.value("n_components", c.n_components);
  c.negative_slope = j.value("negative_slope", c.negative_slope);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
  c.seed = j.value("seed", c.seed);
  c.optimizer = optimizer_from_string(j.value("optimizer", to_string(c.optimizer)));
  c.validate();
  return c;
}

nlohmann::json ConditionalDensityModel::to_json() const {
  return {{"format", "doseband.model"},
          {"version", kFormatVersion},
          {"config", doseband::to_json(config_)},
          {"input_dim", input_dim_},
          {"standardization",
           {{"x_mean", stats_.x_mean},
            {"x_scale", stats_.x_scale},
            {"t_mean", stats_.t_mean},
            {"t_scale", stats_.t_scale},
            {"y_mean", stats_.y_mean},
            {"y_scale", stats_.y_scale}}},
          {"params", params_}};
}

ConditionalDensityModel ConditionalDensityModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "doseband.model") {
      throw InputError("model json: unexpected format tag");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw InputError("model json: unsupported version " + j.at("version").dump());
    }
    const auto& s = j.at("standardization");
    Standardization stats;
    stats.x_mean = s.at("x_mean").get<std::vector<double>>();
    stats.x_scale = s.at("x_scale").get<std::vector<double>>();
    stats.t_mean = s.at("t_mean").get<double>();
    stats.t_scale = s.at("t_scale").get<double>();
    stats.y_mean = s.at("y_mean").get<double>();
    stats.y_scale = s.at("y_scale").get<double>();
    ConditionalDensityModel model(config_from_json(j.at("config")),
                                  j.at("input_dim").get<std::size_t>(), std::move(stats));
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != model.params_.size()) {
      throw InputError("model json: expected " + std::to_string(model.params_.size()) +
                       " parameters, got " + std::to_string(params.size()));
    }
    model.params_ = std::move(params);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model json: ") + e.what());
  }
}

void ConditionalDensityModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file " + path);
  out << to_json().dump() << '\n';
  if (!out) throw InputError("failed writing model file " + path);
}

ConditionalDensityModel ConditionalDensityModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace doseband
