#include "doseband/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include <nlohmann/json.hpp>

#include "doseband/error.hpp"
#include "doseband/hash.hpp"
#include "doseband/parallel.hpp"

namespace doseband {

namespace {

constexpr std::uint64_t kResampleStream = 0x5eed0f5a3b1eULL;
constexpr int kManifestVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InputError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

void check_ensemble(const BootstrapEnsemble& e) {
  if (e.size() < 2) {
    throw InputError("bootstrap ensemble needs n_b >= 2 replicates, has " +
                     std::to_string(e.size()));
  }
}

}  // namespace

Dataset resample_one(const Dataset& data, std::uint64_t seed, std::size_t k) {
  if (data.size() == 0) throw InputError("resample: empty dataset");
  std::mt19937_64 rng(derive_seed(seed ^ kResampleStream, k));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> rows(data.size());
  for (auto& r : rows) r = pick(rng);
  return data.subset(rows);
}

std::vector<Dataset> resample(const Dataset& data, std::size_t n_b, std::uint64_t seed) {
  std::vector<Dataset> out;
  out.reserve(n_b);
  for (std::size_t k = 0; k < n_b; ++k) out.push_back(resample_one(data, seed, k));
  return out;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InputError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile: q must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double dn = static_cast<double>(n);
  // Smallest i (1-based) with i / n >= q, evaluated exactly as the CDF is.
  auto i = static_cast<std::size_t>(std::clamp(std::ceil(q * dn), 1.0, dn));
  while (i > 1 && static_cast<double>(i - 1) / dn >= q) --i;
  while (i < n && static_cast<double>(i) / dn < q) ++i;
  return sorted[i - 1];
}

std::uint64_t dataset_digest(const Dataset& data) {
  Fnv1a h;
  const auto dim = static_cast<double>(data.dim);
  h.update(dim);
  h.update(data.x);
  h.update(data.t);
  h.update(data.y);
  h.update(data.u);
  return h.value();
}

std::uint64_t BootstrapEnsemble::digest() const {
  Fnv1a h;
  for (const auto& m : models) {
    const std::uint64_t d = m.digest();
    h.update(&d, sizeof d);
  }
  h.update(&source_hash, sizeof source_hash);
  return h.value();
}

BootstrapEnsemble fit_ensemble(const Dataset& data, const DensityModelConfig& config,
                               std::size_t n_b, std::uint64_t seed, int jobs) {
  if (n_b < 2) throw InputError("fit_ensemble: n_b must be >= 2");
  data.validate();
  if (data.size() == 0) throw InputError("fit_ensemble: empty dataset");
  BootstrapEnsemble e;
  e.root_seed = seed;
  e.source_hash = dataset_digest(data);
  e.seeds.resize(n_b);
  for (std::size_t k = 0; k < n_b; ++k) e.seeds[k] = derive_seed(seed, k);

  std::vector<std::optional<ConditionalDensityModel>> slots(n_b);
  parallel_for(n_b, jobs, [&](std::size_t k) {
    DensityModelConfig cfg = config;
    cfg.seed = e.seeds[k];
    try {
      slots[k] = train(resample_one(data, seed, k), cfg);
    } catch (const TrainingDiverged& err) {
      throw TrainingDiverged("bootstrap replicate " + std::to_string(k) + ": " + err.what(),
                             err.epoch());
    }
  });
  e.models.reserve(n_b);
  for (auto& s : slots) e.models.push_back(std::move(*s));
  return e;
}

void BootstrapEnsemble::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create ensemble directory " + dir + ": " + ec.message());
  nlohmann::json manifest{{"format", "doseband.ensemble"},
                          {"version", kManifestVersion},
                          {"n_b", size()},
                          {"root_seed", root_seed},
                          {"seeds", seeds},
                          {"source_hash", hex64(source_hash)},
                          {"digest", hex64(digest())}};
  if (!models.empty()) manifest["config"] = to_json(models.front().config());
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t k = 0; k < size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "model_%03zu.json", k);
    models[k].save((fs::path(dir) / name).string());
    files.push_back({{"file", name}, {"digest", hex64(models[k].digest())}});
  }
  manifest["models"] = files;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw InputError("cannot write ensemble manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

BootstrapEnsemble BootstrapEnsemble::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw InputError("no ensemble manifest in " + dir);
  try {
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.at("format").get<std::string>() != "doseband.ensemble" ||
        manifest.at("version").get<int>() != kManifestVersion) {
      throw InputError("ensemble manifest in " + dir + " has an unsupported format");
    }
    BootstrapEnsemble e;
    e.root_seed = manifest.at("root_seed").get<std::uint64_t>();
    e.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
    e.source_hash = std::stoull(manifest.at("source_hash").get<std::string>(), nullptr, 16);
    for (const auto& entry : manifest.at("models")) {
      auto model = ConditionalDensityModel::load(
          (fs::path(dir) / entry.at("file").get<std::string>()).string());
      if (hex64(model.digest()) != entry.at("digest").get<std::string>()) {
        throw InputError("ensemble model " + entry.at("file").get<std::string>() +
                         " does not match its manifest digest");
      }
      e.models.push_back(std::move(model));
    }
    if (e.models.size() != e.seeds.size()) {
      throw InputError("ensemble manifest: model and seed counts differ");
    }
    return e;
  } catch (const nlohmann::json::exception& err) {
    throw InputError("ensemble manifest in " + dir + ": " + err.what());
  }
}

ConfidenceBound percentile_interval(std::span<const SensitivityBound> replicate_bounds,
                                    double alpha) {
  check_alpha(alpha);
  if (replicate_bounds.size() < 2) throw InputError("percentile interval needs >= 2 replicates");
  std::vector<double> lowers, uppers;
  for (const auto& b : replicate_bounds) {
    lowers.push_back(b.lower);
    uppers.push_back(b.upper);
  }
  ConfidenceBound ci;
  ci.alpha = alpha;
  ci.lambda = replicate_bounds.front().lambda;
  ci.lower = quantile(lowers, alpha / 2.0);
  ci.upper = quantile(uppers, 1.0 - alpha / 2.0);
  return ci;
}

ConfidenceBound capo_ci(const BootstrapEnsemble& ensemble, std::span<const double> x, double t,
                        Lambda lambda, double alpha, const BoundSpec& spec) {
  check_ensemble(ensemble);
  check_alpha(alpha);
  std::vector<SensitivityBound> bounds;
  bounds.reserve(ensemble.size());
  for (const auto& m : ensemble.models) bounds.push_back(capo_bounds(m, x, t, lambda, spec));
  return percentile_interval(bounds, alpha);
}

ConfidenceBound apo_ci(const BootstrapEnsemble& ensemble, std::span<const double> xs, double t,
                       Lambda lambda, double alpha, const BoundSpec& spec) {
  check_ensemble(ensemble);
  check_alpha(alpha);
  std::vector<SensitivityBound> bounds;
  bounds.reserve(ensemble.size());
  for (const auto& m : ensemble.models) bounds.push_back(apo_bounds(m, xs, t, lambda, spec));
  return percentile_interval(bounds, alpha);
}

std::vector<std::vector<ConfidenceBound>> apo_ci_sweep(const BootstrapEnsemble& ensemble,
                                                       std::span<const double> xs, double t,
                                                       std::span<const double> lambdas,
                                                       std::span<const double> alphas,
                                                       const BoundSpec& spec, int jobs) {
  check_ensemble(ensemble);
  for (double a : alphas) check_alpha(a);
  std::vector<std::vector<SensitivityBound>> per_replicate(ensemble.size());
  parallel_for(ensemble.size(), jobs, [&](std::size_t k) {
    per_replicate[k] = apo_bounds_sweep(ensemble.models[k], xs, t, lambdas, spec);
  });
  std::vector<std::vector<ConfidenceBound>> out(lambdas.size());
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    std::vector<SensitivityBound> column;
    for (const auto& rep : per_replicate) column.push_back(rep[l]);
    for (double a : alphas) out[l].push_back(percentile_interval(column, a));
  }
  return out;
}

}  // namespace doseband
