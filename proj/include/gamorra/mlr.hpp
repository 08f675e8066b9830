#pragma once

// Multiple linear regression over explanatory vectors: Batch = beta . w,
// frame time = sum over batches, beta fitted by SVD least squares.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gamorra/error.hpp"
#include "gamorra/linalg.hpp"
#include "gamorra/workload.hpp"

namespace gamorra {

// Per-feature standardization z_n = (w_n - mean_n * w_0) / std_n. Entry 0
// (the intercept) is left alone. Because the map is linear in w, a row that
// sums several batches standardizes to the sum of the batches' rows.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  static Scaler identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

  std::vector<double> apply(std::span<const double> w) const {
    std::vector<double> z(w.size());
    z[0] = w[0];
    for (std::size_t n = 1; n < w.size(); ++n) z[n] = (w[n] - mean[n] * w[0]) / std[n];
    return z;
  }

  bool operator==(const Scaler&) const = default;
};

struct FitMeta {
  std::string solver = "svd";
  std::size_t samples = 0;
  double residual_norm = 0.0;
  std::size_t rank = 0;
  std::vector<std::string> warnings;

  bool operator==(const FitMeta&) const = default;
};

struct ModelWeights {
  std::vector<double> beta;  // raw-feature coefficients, beta[0] = intercept
  Scaler scaler;
  std::size_t dim = 0;
  FitMeta meta;

  bool operator==(const ModelWeights&) const = default;

  static ModelWeights zeros(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), Scaler::identity(dim), dim, {}};
  }

  // Coefficients in standardized space: gamma . z == beta . w.
  std::vector<double> standardized() const {
    std::vector<double> g(dim);
    g[0] = beta[0];
    for (std::size_t n = 1; n < dim; ++n) {
      g[n] = beta[n] * scaler.std[n];
      g[0] += beta[n] * scaler.mean[n];
    }
    return g;
  }

  void set_standardized(std::span<const double> g) {
    beta.assign(dim, 0.0);
    beta[0] = g[0];
    for (std::size_t n = 1; n < dim; ++n) {
      beta[n] = g[n] / scaler.std[n];
      beta[0] -= beta[n] * scaler.mean[n];
    }
  }
};

// Rows are explanatory vectors: either one batch (w_0 = 1) or the sum of a
// frame's batch vectors (w_0 = batch count), paired with observed times.
struct ObservationSet {
  linalg::Matrix w;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
};

inline ObservationSet make_observations(std::span<const ExplanatoryVector> rows, std::span<const double> y) {
  if (rows.size() != y.size()) throw InvariantError("observation rows and targets differ in length");
  std::size_t dim = rows.empty() ? 0 : rows.front().size();
  ObservationSet obs{linalg::Matrix(rows.size(), dim), std::vector<double>(y.begin(), y.end())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw InvariantError("observation rows differ in dimension");
    for (std::size_t c = 0; c < dim; ++c) obs.w(i, c) = rows[i][c];
  }
  return obs;
}

// Scaler statistics over a set of rows, measured per unit of intercept so
// aggregated frame rows yield per-batch statistics.
inline Scaler fit_scaler(const linalg::Matrix& w) {
  const std::size_t m = w.rows();
  const std::size_t dim = w.cols();
  Scaler sc = Scaler::identity(dim);
  double weight = 0.0;
  for (std::size_t i = 0; i < m; ++i) weight += w(i, 0);
  if (!(weight > 0.0)) return sc;
  for (std::size_t n = 1; n < dim; ++n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += w(i, n);
    double mean = sum / weight;
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double d = w(i, n) - mean * w(i, 0);
      ss += d * d;
    }
    double sd = std::sqrt(ss / weight);
    sc.mean[n] = mean;
    sc.std[n] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
  }
  return sc;
}

inline linalg::Matrix standardize_rows(const linalg::Matrix& w, const Scaler& sc) {
  linalg::Matrix z(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    auto zi = sc.apply(w.row(i));
    for (std::size_t c = 0; c < w.cols(); ++c) z(i, c) = zi[c];
  }
  return z;
}

inline constexpr double kDefaultRcond = 1e-10;

// beta = V S^-1 U^T Y on standardized features, mapped back to raw-feature
// coefficients. Singular values under rcond * s_max are dropped, which is
// what gives inactive (all-zero) stages a zero coefficient.
inline ModelWeights fit_svd(const ObservationSet& obs, double rcond = kDefaultRcond) {
  const std::size_t m = obs.w.rows();
  const std::size_t dim = obs.w.cols();
  if (dim == 0) throw InvariantError("fit_svd: empty feature dimension");
  if (m < dim) {
    throw InsufficientDataError("fit_svd needs at least " + std::to_string(dim) + " observations, got " +
                                std::to_string(m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(obs.y[i])) throw InvariantError("fit_svd: non-finite target");
    for (double v : obs.w.row(i)) {
      if (!std::isfinite(v)) throw InvariantError("fit_svd: non-finite feature");
    }
  }
  if (rcond <= 0.0) {
    for (std::size_t c = 0; c < dim; ++c) {
      bool all_zero = true;
      for (std::size_t i = 0; i < m && all_zero; ++i) all_zero = obs.w(i, c) == 0.0;
      if (all_zero) {
        throw InvariantError("fit_svd: column " + std::to_string(c) + " is all zero and pruning is disabled");
      }
    }
  }

  ModelWeights wts = ModelWeights::zeros(dim);
  wts.scaler = fit_scaler(obs.w);
  linalg::Matrix z = standardize_rows(obs.w, wts.scaler);
  linalg::LstsqResult sol = linalg::lstsq(z, obs.y, rcond);
  wts.set_standardized(sol.x);

  auto pred = obs.w * std::span<const double>(wts.beta);
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) rss += (obs.y[i] - pred[i]) * (obs.y[i] - pred[i]);
  wts.meta.solver = "svd";
  wts.meta.samples = m;
  wts.meta.residual_norm = std::sqrt(rss);
  wts.meta.rank = sol.rank;
  for (std::size_t n = 1; n < dim; ++n) {
    if (wts.beta[n] < 0.0) {
      wts.meta.warnings.push_back("negative coefficient beta_" + std::to_string(n) + " = " +
                                  std::to_string(wts.beta[n]));
    }
  }
  return wts;
}

inline double predict_batch(const ModelWeights& wts, std::span<const double> w) {
  if (w.size() != wts.beta.size()) {
    throw InvariantError("dimension mismatch: weights " + std::to_string(wts.beta.size()) + ", vector " +
                         std::to_string(w.size()));
  }
  return linalg::dot(wts.beta, w);
}

inline double predict_frame(const ModelWeights& wts, std::span<const ExplanatoryVector> batches) {
  double total = 0.0;
  for (const ExplanatoryVector& w : batches) total += predict_batch(wts, w);
  return total;
}

struct EstimatePair {
  double estimate = 0.0;
  double actual = 0.0;
};

inline double sliding_rmse(std::span<const EstimatePair> window) {
  if (window.empty()) throw InvariantError("sliding_rmse: empty window");
  double ss = 0.0;
  for (const EstimatePair& p : window) ss += (p.estimate - p.actual) * (p.estimate - p.actual);
  return std::sqrt(ss / static_cast<double>(window.size()));
}

inline nlohmann::json weights_to_json(const ModelWeights& w) {
  nlohmann::json j;
  j["beta"] = w.beta;
  j["scaler"]["mean"] = w.scaler.mean;
  j["scaler"]["std"] = w.scaler.std;
  j["dim"] = w.dim;
  j["meta"]["solver"] = w.meta.solver;
  j["meta"]["samples"] = w.meta.samples;
  j["meta"]["residual_norm"] = w.meta.residual_norm;
  j["meta"]["rank"] = w.meta.rank;
  j["meta"]["warnings"] = w.meta.warnings;
  return j;
}

inline ModelWeights weights_from_json(const nlohmann::json& j) {
  try {
    ModelWeights w;
    w.beta = j.at("beta").get<std::vector<double>>();
    w.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    w.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
    w.dim = j.at("dim").get<std::size_t>();
    if (w.beta.size() != w.dim || w.scaler.mean.size() != w.dim || w.scaler.std.size() != w.dim) {
      throw InvariantError("weights arrays do not match dim");
    }
    for (std::size_t n = 1; n < w.dim; ++n) {
      if (!(w.scaler.std[n] > 0.0)) throw InvariantError("scaler std must be > 0");
    }
    if (j.contains("meta")) {
      const auto& m = j["meta"];
      w.meta.solver = m.value("solver", "svd");
      w.meta.samples = m.value("samples", std::size_t{0});
      w.meta.residual_norm = m.value("residual_norm", 0.0);
      w.meta.rank = m.value("rank", std::size_t{0});
      w.meta.warnings = m.value("warnings", std::vector<std::string>{});
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed weights: ") + e.what());
  }
}

inline void save_weights(const ModelWeights& w, const std::filesystem::path& path,
                         const nlohmann::json& extra_meta = {}) {
  nlohmann::json j = weights_to_json(w);
  if (extra_meta.is_object()) {
    for (const auto& [k, v] : extra_meta.items()) j["meta"][k] = v;
  }
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write weights: " + path.string());
}

inline ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open weights: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("malformed weights " + path.string() + ": " + e.what());
  }
  return weights_from_json(j);
}

}  // namespace gamorra
