#include "doseband/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "doseband/bootstrap.hpp"
#include "doseband/bounds.hpp"
#include "doseband/density.hpp"
#include "doseband/error.hpp"
#include "doseband/hash.hpp"
#include "doseband/io.hpp"
#include "doseband/parallel.hpp"
#include "doseband/synthetic.hpp"

namespace doseband {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kSplitStream = 0x7a11d5;

// Flags bound to variables, each also settable from a config section. A flag
// given on the command line wins over the config value.
class Bindings {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, T& var,
                   const std::string& help) {
    CLI::Option* opt = app->add_option(flag, var, help)->capture_default_str();
    if constexpr (std::is_same_v<T, std::vector<double>>) opt->delimiter(',');
    entries_.push_back({opt, key, [&var](const json& j) { var = j.get<T>(); }});
    return opt;
  }

  void apply(const json& section) const {
    for (const auto& e : entries_) {
      if (e.opt->count() > 0 || !section.contains(e.key)) continue;
      try {
        e.set(section.at(e.key));
      } catch (const json::exception& err) {
        throw InputError("config key '" + e.key + "': " + err.what());
      }
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const json&)> set;
  };
  std::vector<Entry> entries_;
};

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw InputError(flag + " is required");
}

void check_lambdas(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw InputError("--lambdas must not be empty");
  for (double l : lambdas) {
    if (!(l >= 1.0) || !std::isfinite(l)) {
      throw InputError("every Lambda must be >= 1, got " + format_double(l));
    }
  }
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw InputError("cannot create directory " + parent.string() + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

std::string json_number(double v) {
  return std::isfinite(v) ? format_double(v) : "null";
}

// ---- shared option groups --------------------------------------------------

struct ModelOptions {
  DensityModelConfig cfg;
  std::string optimizer = "sgd";

  void bind(CLI::App* app, Bindings& b) {
    b.add(app, "--hidden", "hidden_units", cfg.hidden_units, "Hidden units per layer");
    b.add(app, "--depth", "depth", cfg.depth, "Extractor depth");
    b.add(app, "--components", "n_components", cfg.n_components, "Mixture components");
    b.add(app, "--negative-slope", "negative_slope", cfg.negative_slope, "Leaky ReLU slope");
    b.add(app, "--lr", "learning_rate", cfg.learning_rate, "Learning rate");
    b.add(app, "--batch", "batch_size", cfg.batch_size, "Mini-batch size");
    b.add(app, "--epochs", "epochs", cfg.epochs, "Training epochs");
    b.add(app, "--sigma-floor", "sigma_floor", cfg.sigma_floor,
          "Lower bound on component scale (standardized units)");
    b.add(app, "--optimizer", "optimizer", optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
  }

  DensityModelConfig resolve(std::uint64_t seed) const {
    DensityModelConfig c = cfg;
    c.seed = seed;
    c.optimizer = optimizer_from_string(optimizer);
    c.validate();
    return c;
  }
};

struct BoundOptions {
  std::vector<double> lambdas{1.0, 1.1, 1.2, 1.6};
  std::vector<double> treatments{0.0, 0.25, 0.5, 0.75, 1.0};
  std::string optimizer = "grid";
  std::string estimator = "mc";
  std::size_t mc_samples = 1024;
  int gh_order = 64;
  std::string threshold_grid = "samples";
  std::size_t even_points = 256;
  std::uint64_t seed = 0;

  void bind(CLI::App* app, Bindings& b, bool with_treatments = true) {
    b.add(app, "--lambdas", "lambdas", lambdas, "Comma-separated Lambda values (>= 1)");
    if (with_treatments) {
      b.add(app, "--treatments", "treatments", treatments, "Comma-separated treatment levels");
    }
    b.add(app, "--bound-optimizer", "bound_optimizer", optimizer, "grid, line or gradient")
        ->check(CLI::IsMember({"grid", "line", "gradient"}));
    b.add(app, "--estimator", "estimator", estimator, "mc, gh or exact")
        ->check(CLI::IsMember({"mc", "gh", "exact"}));
    b.add(app, "--mc-samples", "mc_samples", mc_samples, "Monte Carlo draws per (x, t)");
    b.add(app, "--gh-order", "gh_order", gh_order, "Gauss-Hermite order");
    b.add(app, "--threshold-grid", "threshold_grid", threshold_grid, "samples or even")
        ->check(CLI::IsMember({"samples", "even"}));
    b.add(app, "--even-points", "even_points", even_points, "Points of the even threshold grid");
    b.add(app, "--bound-seed", "bound_seed", seed, "Seed of the frozen integration nodes");
  }

  BoundSpec resolve() const {
    check_lambdas(lambdas);
    BoundSpec s;
    s.optimizer = bound_optimizer_from_string(optimizer);
    s.estimator = estimator_from_string(estimator);
    s.mc_samples = mc_samples;
    s.gh_order = gh_order;
    s.grid = threshold_grid == "even" ? ThresholdGrid::kEven : ThresholdGrid::kSamples;
    s.even_points = even_points;
    s.seed = seed;
    if (s.mc_samples < 1) throw InputError("--mc-samples must be >= 1");
    if (s.gh_order < 1 || s.gh_order > kMaxHermiteOrder) {
      throw InputError("--gh-order must lie in [1, " + std::to_string(kMaxHermiteOrder) + "]");
    }
    return s;
  }
};

// First max_rows rows of data (all when max_rows is 0).
std::vector<double> covariates(const Dataset& data, std::size_t max_rows) {
  const std::size_t n = max_rows == 0 ? data.size() : std::min(max_rows, data.size());
  if (n == 0) throw InputError("evaluation dataset is empty");
  return {data.x.begin(), data.x.begin() + static_cast<std::ptrdiff_t>(n * data.dim)};
}

void check_dim(const ConditionalDensityModel& model, std::size_t dim, const std::string& what) {
  if (model.input_dim() != dim) {
    throw InputError("model expects " + std::to_string(model.input_dim()) +
                     " covariates but " + what + " has " + std::to_string(dim));
  }
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  SyntheticConfig cfg;
  std::string out, oracle, manifest;
  std::vector<double> oracle_treatments;
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
  require(a.out, "--out");
  a.cfg.validate();
  const std::string oracle = a.oracle.empty() ? fs::path(a.out).replace_extension("").string() +
                                                    "_oracle.csv"
                                              : a.oracle;
  const std::string manifest =
      a.manifest.empty() ? fs::path(a.out).replace_extension("").string() + "_manifest.json"
                         : a.manifest;

  const Dataset data = generate(a.cfg);
  ensure_parent(a.out);
  write_dataset_csv(a.out, data);
  ensure_parent(oracle);
  write_oracle_csv(oracle, oracle_rows(data, a.cfg, a.oracle_treatments));

  json m{{"format", "doseband.synthetic"},
         {"version", 1},
         {"n", a.cfg.n},
         {"gamma_t", a.cfg.gamma_t},
         {"gamma_y", a.cfg.gamma_y},
         {"noise_var", a.cfg.noise_var},
         {"bb_n", a.cfg.bb_n},
         {"seed", a.cfg.seed},
         {"oracle_treatments", a.oracle_treatments},
         {"dataset", fs::path(a.out).filename().string()},
         {"oracle", fs::path(oracle).filename().string()},
         {"dataset_digest", hex64(dataset_digest(data))}};
  open_out(manifest) << m.dump(2) << '\n';
  out << "wrote " << data.size() << " rows to " << a.out << ", oracle to " << oracle << '\n';
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  ModelOptions model;
  std::uint64_t seed = 1331;
  std::string data, out;
  double validation_fraction = 0.1;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  require(a.data, "--data");
  require(a.out, "--out");
  if (!(a.validation_fraction >= 0.0 && a.validation_fraction < 1.0)) {
    throw InputError("--validation-fraction must lie in [0, 1)");
  }
  const DensityModelConfig cfg = a.model.resolve(a.seed);
  const Dataset all = read_dataset_csv(a.data);
  if (all.size() == 0) throw InputError(a.data + ": no rows");

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(a.seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(a.validation_fraction * static_cast<double>(all.size())));
  if (n_val >= all.size()) n_val = all.size() - 1;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Dataset train_set = all.subset(train_rows);

  const ConditionalDensityModel model = train(train_set, cfg);
  ensure_parent(a.out);
  model.save(a.out);
  out << "epochs=" << cfg.epochs << " train_nll=" << format_double(model.mean_nll(train_set));
  if (n_val > 0) out << " validation_nll=" << format_double(model.mean_nll(all.subset(val_rows)));
  out << '\n' << "wrote model to " << a.out << '\n';
}

// ---- bounds ----------------------------------------------------------------

struct BoundsArgs {
  BoundOptions bounds;
  std::string model, data, out, capo_out;
  std::size_t max_rows = 0;
  int jobs = 1;
};

void cmd_bounds(const BoundsArgs& a, std::ostream& out) {
  require(a.model, "--model");
  require(a.data, "--data");
  require(a.out, "--out");
  const BoundSpec spec = a.bounds.resolve();
  const auto model = ConditionalDensityModel::load(a.model);
  const Dataset data = read_dataset_csv(a.data);
  check_dim(model, data.dim, a.data);
  const std::vector<double> xs = covariates(data, a.max_rows);
  const std::size_t d = data.dim, n = xs.size() / d;
  const std::vector<double> ts = sorted_unique(a.bounds.treatments);
  const std::vector<double> lambdas = sorted_unique(a.bounds.lambdas);

  // One task per (t, x); per-x results are averaged in row order afterwards,
  // so the output does not depend on the job count.
  std::vector<std::vector<SensitivityBound>> capo(ts.size() * n);
  parallel_for(capo.size(), a.jobs, [&](std::size_t k) {
    const std::size_t ti = k / n, i = k % n;
    capo[k] = capo_bounds_sweep(model, std::span(xs).subspan(i * d, d), ts[ti], lambdas, spec);
  });

  auto curves = open_out(a.out);
  curves << "t,lambda,lower,upper,mu_tilde\n";
  std::size_t unconverged = 0;
  for (std::size_t ti = 0; ti < ts.size(); ++ti) {
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      double lo = 0.0, hi = 0.0, mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& b = capo[ti * n + i][l];
        lo += b.lower;
        hi += b.upper;
        mu += b.mu_tilde;
        if (!b.converged) ++unconverged;
      }
      const double dn = static_cast<double>(n);
      curves << format_double(ts[ti]) << ',' << format_double(lambdas[l]) << ','
             << format_double(lo / dn) << ',' << format_double(hi / dn) << ','
             << format_double(mu / dn) << '\n';
    }
  }

  if (!a.capo_out.empty()) {
    auto rows = open_out(a.capo_out);
    for (std::size_t j = 0; j < d; ++j) rows << "x_" << j << ',';
    rows << "t,lambda,lower,upper,mu_tilde\n";
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
          const auto& b = capo[ti * n + i][l];
          for (std::size_t j = 0; j < d; ++j) rows << format_double(xs[i * d + j]) << ',';
          rows << format_double(ts[ti]) << ',' << format_double(lambdas[l]) << ','
               << format_double(b.lower) << ',' << format_double(b.upper) << ','
               << format_double(b.mu_tilde) << '\n';
        }
      }
    }
  }
  if (unconverged > 0) {
    out << "note: gradient search hit the iteration cap on " << unconverged << " evaluations\n";
  }
  out << "wrote " << ts.size() * lambdas.size() << " curve rows over " << n << " covariate rows to "
      << a.out << '\n';
}

// ---- ci ----------------------------------------------------------------------

struct CiArgs {
  ModelOptions model;
  BoundOptions bounds;
  std::uint64_t seed = 1331;
  std::size_t n_boot = 20;
  std::vector<double> alphas{0.05};
  std::string data, eval_data, ensemble_dir, out;
  std::size_t max_rows = 0;
  int jobs = 1;
};

BootstrapEnsemble obtain_ensemble(const CiArgs& a, const Dataset& data, std::ostream& out) {
  const bool cached =
      !a.ensemble_dir.empty() && fs::exists(fs::path(a.ensemble_dir) / "manifest.json");
  if (cached) {
    BootstrapEnsemble e = BootstrapEnsemble::load(a.ensemble_dir);
    if (e.source_hash != dataset_digest(data)) {
      throw InputError("ensemble in " + a.ensemble_dir + " was fitted on a different dataset");
    }
    out << "loaded " << e.size() << " replicates from " << a.ensemble_dir << '\n';
    return e;
  }
  BootstrapEnsemble e = fit_ensemble(data, a.model.resolve(a.seed), a.n_boot, a.seed, a.jobs);
  if (!a.ensemble_dir.empty()) e.save(a.ensemble_dir);
  return e;
}

void cmd_ci(const CiArgs& a, std::ostream& out, std::ostream& err) {
  require(a.data, "--data");
  require(a.out, "--out");
  if (a.n_boot < 2) throw InputError("--n-boot must be >= 2, got " + std::to_string(a.n_boot));
  if (a.alphas.empty()) throw InputError("--alphas must not be empty");
  const BoundSpec spec = a.bounds.resolve();
  const Dataset data = read_dataset_csv(a.data);
  const Dataset eval = a.eval_data.empty() ? data : read_dataset_csv(a.eval_data);
  const BootstrapEnsemble ensemble = obtain_ensemble(a, data, out);
  if (ensemble.size() < 2) throw InputError("ensemble has fewer than 2 replicates");
  if (ensemble.size() == 2) {
    err << "warning: n_b = 2 gives a percentile interval resolved only by the min and max "
           "replicate\n";
  }
  check_dim(ensemble.models.front(), eval.dim, "evaluation data");
  const std::vector<double> xs = covariates(eval, a.max_rows);
  const std::vector<double> ts = sorted_unique(a.bounds.treatments);
  const std::vector<double> lambdas = sorted_unique(a.bounds.lambdas);
  const std::vector<double> alphas = sorted_unique(a.alphas);

  auto csv = open_out(a.out);
  csv << "t,lambda,alpha,lower,upper\n";
  for (double t : ts) {
    const auto grid = apo_ci_sweep(ensemble, xs, t, lambdas, alphas, spec, a.jobs);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        csv << format_double(t) << ',' << format_double(lambdas[l]) << ','
            << format_double(alphas[k]) << ',' << format_double(grid[l][k].lower) << ','
            << format_double(grid[l][k].upper) << '\n';
      }
    }
  }
  out << "wrote " << ts.size() * lambdas.size() * alphas.size() << " CI rows from "
      << ensemble.size() << " replicates to " << a.out << '\n';
}

// ---- coverage ----------------------------------------------------------------

struct CoverageArgs {
  BoundOptions bounds;
  std::string oracle, model, ensemble_dir, out, target = "capo_u";
  std::vector<double> treatments;
  double alpha = 0.05;
  int jobs = 1;
};

bool on_level(double t, const std::vector<double>& levels) {
  return std::any_of(levels.begin(), levels.end(),
                     [t](double l) { return std::abs(t - l) <= 1e-9; });
}

void cmd_coverage(const CoverageArgs& a, std::ostream& out) {
  require(a.oracle, "--oracle");
  require(a.out, "--out");
  if (a.model.empty() == a.ensemble_dir.empty()) {
    throw InputError("exactly one of --model and --ensemble-dir is required");
  }
  const bool use_ci = !a.ensemble_dir.empty();
  if (use_ci && !(a.alpha > 0.0 && a.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
  const BoundSpec spec = a.bounds.resolve();
  const std::vector<double> lambdas = sorted_unique(a.bounds.lambdas);

  std::vector<OracleRow> rows = read_oracle_csv(a.oracle);
  if (!a.treatments.empty()) {
    std::erase_if(rows, [&](const OracleRow& r) { return !on_level(r.t, a.treatments); });
  }
  if (rows.empty()) throw InputError(a.oracle + ": no oracle rows at the requested treatments");

  std::vector<ConditionalDensityModel> models;
  if (use_ci) {
    BootstrapEnsemble e = BootstrapEnsemble::load(a.ensemble_dir);
    if (e.size() < 2) throw InputError("ensemble has fewer than 2 replicates");
    models = std::move(e.models);
  } else {
    models.push_back(ConditionalDensityModel::load(a.model));
  }
  check_dim(models.front(), 1, "the oracle file");

  // Interval per (row, lambda).
  std::vector<std::vector<std::pair<double, double>>> intervals(rows.size());
  parallel_for(rows.size(), a.jobs, [&](std::size_t i) {
    const double x = rows[i].x;
    std::vector<std::vector<SensitivityBound>> per_model;
    for (const auto& m : models) {
      per_model.push_back(capo_bounds_sweep(m, std::span(&x, 1), rows[i].t, lambdas, spec));
    }
    intervals[i].resize(lambdas.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      if (!use_ci) {
        intervals[i][l] = {per_model[0][l].lower, per_model[0][l].upper};
        continue;
      }
      std::vector<SensitivityBound> column;
      for (const auto& pm : per_model) column.push_back(pm[l]);
      const ConfidenceBound ci = percentile_interval(column, a.alpha);
      intervals[i][l] = {ci.lower, ci.upper};
    }
  });

  struct Cell {
    std::size_t eligible = 0, covered = 0;
  };
  std::map<std::pair<double, double>, Cell> cells;  // (lambda, t)
  std::vector<double> ts;
  for (const auto& r : rows) ts.push_back(r.t);
  ts = sorted_unique(ts);
  for (double l : lambdas) {
    for (double t : ts) cells[{l, t}];
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double target = a.target == "capo" ? rows[i].capo : rows[i].capo_u;
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      if (!within_sensitivity(rows[i].lambda_star, lambdas[l])) continue;
      Cell& c = cells[{lambdas[l], rows[i].t}];
      ++c.eligible;
      if (intervals[i][l].first <= target && target <= intervals[i][l].second) ++c.covered;
    }
  }

  std::ostringstream js;
  js << "{\n  \"format\": \"doseband.coverage\",\n  \"version\": 1,\n"
     << "  \"target\": \"" << a.target << "\",\n"
     << "  \"interval\": \"" << (use_ci ? "bootstrap_ci" : "bound") << "\",\n"
     << "  \"alpha\": " << (use_ci ? json_number(a.alpha) : "null") << ",\n"
     << "  \"bound_optimizer\": \"" << to_string(spec.optimizer) << "\",\n"
     << "  \"n_points\": " << rows.size() << ",\n  \"records\": [";
  out << "lambda      t  eligible  covered  coverage\n";
  bool first = true;
  for (const auto& [key, c] : cells) {
    const auto [l, t] = key;
    const std::optional<double> rate =
        c.eligible > 0 ? std::optional(static_cast<double>(c.covered) / static_cast<double>(c.eligible))
                       : std::nullopt;
    js << (first ? "\n" : ",\n") << "    {\"lambda\": " << format_double(l)
       << ", \"t\": " << format_double(t) << ", \"eligible_points\": " << c.eligible
       << ", \"covered\": " << c.covered
       << ", \"coverage_rate\": " << (rate ? json_number(*rate) : "null") << "}";
    first = false;
    char line[96];
    std::snprintf(line, sizeof line, "%6.3f %6.3f %9zu %8zu  %s\n", l, t, c.eligible, c.covered,
                  rate ? std::to_string(*rate).c_str() : "n/a");
    out << line;
  }
  js << "\n  ]\n}\n";
  open_out(a.out) << js.str();
  out << "wrote coverage report to " << a.out << '\n';
}

int run(CLI::App& app, std::vector<std::string> reversed_args, std::ostream& out,
        std::ostream& err) {
  std::string config_path;
  app.add_option("--config", config_path, "JSON config with per-subcommand sections");
  app.require_subcommand(1);

  GenerateArgs gen;
  Bindings gen_b;
  auto* g = app.add_subcommand("generate", "Simulate the confounded dose-response dataset");
  gen_b.add(g, "--n", "n", gen.cfg.n, "Rows");
  gen_b.add(g, "--gamma-t", "gamma_t", gen.cfg.gamma_t, "Confounder effect on treatment");
  gen_b.add(g, "--gamma-y", "gamma_y", gen.cfg.gamma_y, "Confounder effect on outcome");
  gen_b.add(g, "--noise-var", "noise_var", gen.cfg.noise_var, "Outcome noise variance");
  gen_b.add(g, "--bb-n", "bb_n", gen.cfg.bb_n, "Beta-Binomial trials");
  gen_b.add(g, "--seed", "seed", gen.cfg.seed, "Root seed");
  gen_b.add(g, "--out", "out", gen.out, "Dataset CSV path");
  gen_b.add(g, "--oracle", "oracle", gen.oracle, "Oracle CSV path (default <out>_oracle.csv)");
  gen_b.add(g, "--manifest", "manifest", gen.manifest,
            "Manifest path (default <out>_manifest.json)");
  gen_b.add(g, "--oracle-treatments", "oracle_treatments", gen.oracle_treatments,
            "Expand every (x, u) across these treatment levels in the oracle file");

  TrainArgs tr;
  Bindings tr_b;
  auto* t = app.add_subcommand("train", "Fit the conditional density model");
  tr.model.bind(t, tr_b);
  tr_b.add(t, "--seed", "seed", tr.seed, "Training seed");
  tr_b.add(t, "--data", "data", tr.data, "Dataset CSV");
  tr_b.add(t, "--out", "out", tr.out, "Model JSON path");
  tr_b.add(t, "--validation-fraction", "validation_fraction", tr.validation_fraction,
           "Held-out share of rows for the validation NLL");

  BoundsArgs bd;
  Bindings bd_b;
  bd.jobs = default_jobs();
  auto* b = app.add_subcommand("bounds", "APO / CAPO ignorance intervals over a (t, Lambda) grid");
  bd.bounds.bind(b, bd_b);
  bd_b.add(b, "--model", "model", bd.model, "Model JSON");
  bd_b.add(b, "--data", "data", bd.data, "Dataset CSV whose covariates are averaged over");
  bd_b.add(b, "--out", "out", bd.out, "Curves CSV path");
  bd_b.add(b, "--capo-out", "capo_out", bd.capo_out, "Optional per-x CAPO CSV path");
  bd_b.add(b, "--max-rows", "max_rows", bd.max_rows, "Use only the first rows (0 = all)");
  bd_b.add(b, "--jobs", "jobs", bd.jobs, "Worker threads (default $DOSEBAND_JOBS or 1)");

  CiArgs ci;
  Bindings ci_b;
  ci.jobs = default_jobs();
  auto* c = app.add_subcommand("ci", "Percentile-bootstrap bands around the APO intervals");
  ci.model.bind(c, ci_b);
  ci.bounds.bind(c, ci_b);
  ci_b.add(c, "--seed", "seed", ci.seed, "Root seed of the resamples");
  ci_b.add(c, "--n-boot", "n_boot", ci.n_boot, "Bootstrap replicates (>= 2)");
  ci_b.add(c, "--alphas", "alphas", ci.alphas, "Comma-separated significance levels");
  ci_b.add(c, "--data", "data", ci.data, "Training dataset CSV");
  ci_b.add(c, "--eval-data", "eval_data", ci.eval_data, "Covariates to average over (default --data)");
  ci_b.add(c, "--ensemble-dir", "ensemble_dir", ci.ensemble_dir,
           "Reuse the ensemble stored here, or save a fresh fit to it");
  ci_b.add(c, "--out", "out", ci.out, "CI CSV path");
  ci_b.add(c, "--max-rows", "max_rows", ci.max_rows, "Use only the first rows (0 = all)");
  ci_b.add(c, "--jobs", "jobs", ci.jobs, "Worker threads (default $DOSEBAND_JOBS or 1)");

  CoverageArgs cov;
  Bindings cov_b;
  cov.jobs = default_jobs();
  auto* v = app.add_subcommand("coverage", "Score intervals against the oracle");
  cov.bounds.bind(v, cov_b, false);
  cov_b.add(v, "--oracle", "oracle", cov.oracle, "Oracle CSV");
  cov_b.add(v, "--model", "model", cov.model, "Model JSON (single-model intervals)");
  cov_b.add(v, "--ensemble-dir", "ensemble_dir", cov.ensemble_dir,
            "Ensemble directory (bootstrap CI intervals)");
  cov_b.add(v, "--alpha", "alpha", cov.alpha, "Significance level with --ensemble-dir");
  cov_b.add(v, "--treatments", "treatments", cov.treatments,
            "Restrict to these treatment levels (default: all in the oracle)");
  cov_b.add(v, "--target", "target", cov.target,
            "capo_u: E[Y_t | x, u]; capo: E[Y_t | x]")
      ->check(CLI::IsMember({"capo_u", "capo"}));
  cov_b.add(v, "--out", "out", cov.out, "Coverage JSON path");
  cov_b.add(v, "--jobs", "jobs", cov.jobs, "Worker threads (default $DOSEBAND_JOBS or 1)");

  try {
    app.parse(reversed_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  json config = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw InputError("cannot read config " + config_path);
    try {
      in >> config;
    } catch (const json::exception& e) {
      throw InputError("config " + config_path + ": " + e.what());
    }
    if (!config.is_object()) throw InputError("config " + config_path + " must be a JSON object");
  }
  auto section = [&](const char* name) {
    return config.contains(name) ? config.at(name) : json::object();
  };

  for (int* jobs : {&bd.jobs, &ci.jobs, &cov.jobs}) {
    if (*jobs < 1) *jobs = 1;
  }
  if (g->parsed()) {
    gen_b.apply(section("generate"));
    cmd_generate(gen, out);
  } else if (t->parsed()) {
    tr_b.apply(section("train"));
    cmd_train(tr, out);
  } else if (b->parsed()) {
    bd_b.apply(section("bounds"));
    bd.jobs = std::max(1, bd.jobs);
    cmd_bounds(bd, out);
  } else if (c->parsed()) {
    ci_b.apply(section("ci"));
    ci.jobs = std::max(1, ci.jobs);
    cmd_ci(ci, out, err);
  } else if (v->parsed()) {
    cov_b.apply(section("coverage"));
    cov.jobs = std::max(1, cov.jobs);
    cmd_coverage(cov, out);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity bands for continuous-treatment dose-response curves", "doseband"};
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    return run(app, std::move(reversed), out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace doseband
