#pragma once

// Hybrid offline/online training. Weights are fitted offline before a
// session; during the session a mode machine decides, frame by frame,
// whether predictions come from the frozen offline weights or from a copy
// that is refined online with one LMS pass per frame.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gamorra/error.hpp"
#include "gamorra/mlr.hpp"
#include "gamorra/workload.hpp"

namespace gamorra {

enum class Solver { kSvd, kSgd };

struct TrainConfig {
  double initial_lr = 0.01;
  std::uint32_t offline_epochs = 200;
  std::uint32_t offline_batch_size = 32;
  double train_test_split = 0.3;  // held-out fraction
  std::uint32_t patience = 10;
  double rmse_threshold_ms = 0.5;
  std::uint32_t rmse_window = 10;
  std::uint32_t offline_frame_count = 720;
  Solver solver = Solver::kSvd;
  double rcond = kDefaultRcond;
  std::uint64_t seed = 0;  // SGD shuffling

  void validate() const {
    if (!(initial_lr > 0.0)) throw InvariantError("initial_lr must be > 0");
    if (!(train_test_split > 0.0 && train_test_split < 1.0)) {
      throw InvariantError("train_test_split must be in (0, 1)");
    }
    if (patience < 1) throw InvariantError("patience must be >= 1");
    if (rmse_window < 1) throw InvariantError("rmse_window must be >= 1");
    if (offline_batch_size < 1) throw InvariantError("offline_batch_size must be >= 1");
    if (!(rmse_threshold_ms >= 0.0)) throw InvariantError("rmse_threshold_ms must be >= 0");
  }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.initial_lr = j.value("initial_lr", c.initial_lr);
    c.offline_epochs = j.value("offline_epochs", c.offline_epochs);
    c.offline_batch_size = j.value("offline_batch_size", c.offline_batch_size);
    c.train_test_split = j.value("train_test_split", c.train_test_split);
    c.patience = j.value("patience", c.patience);
    c.rmse_threshold_ms = j.value("rmse_threshold_ms", c.rmse_threshold_ms);
    c.rmse_window = j.value("rmse_window", c.rmse_window);
    c.offline_frame_count = j.value("offline_frame_count", c.offline_frame_count);
    c.rcond = j.value("rcond", c.rcond);
    c.seed = j.value("seed", c.seed);
    std::string solver = j.value("solver", std::string("svd"));
    if (solver == "svd") {
      c.solver = Solver::kSvd;
    } else if (solver == "sgd") {
      c.solver = Solver::kSgd;
    } else {
      throw InvariantError("unknown solver '" + solver + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("malformed config " + path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

// One frame's batch vectors and its observed frame time.
struct FrameSample {
  std::vector<ExplanatoryVector> batches;
  double actual_ms = 0.0;
};

inline ExplanatoryVector aggregate(std::span<const ExplanatoryVector> batches, std::size_t dim) {
  ExplanatoryVector sum(dim, 0.0);
  for (const ExplanatoryVector& w : batches) {
    if (w.size() != dim) throw InvariantError("batch vector dimension mismatch");
    for (std::size_t n = 0; n < dim; ++n) sum[n] += w[n];
  }
  return sum;
}

struct TrainReport {
  std::size_t train_frames = 0;
  std::size_t test_frames = 0;
  std::size_t epochs_run = 0;
  double train_mae_ms = 0.0;
  double test_mae_ms = 0.0;
  double train_rmse_ms = 0.0;
  double test_rmse_ms = 0.0;
};

struct OfflineResult {
  ModelWeights weights;
  TrainReport report;
};

namespace detail {

inline void frame_errors(const ModelWeights& w, const ObservationSet& obs, std::size_t begin, std::size_t end,
                         double& mae, double& rmse) {
  mae = rmse = 0.0;
  if (end <= begin) return;
  for (std::size_t i = begin; i < end; ++i) {
    double e = predict_batch(w, obs.w.row(i)) - obs.y[i];
    mae += std::abs(e);
    rmse += e * e;
  }
  double n = static_cast<double>(end - begin);
  mae /= n;
  rmse = std::sqrt(rmse / n);
}

// Mini-batch gradient descent with Adam moments on standardized rows and
// scaled targets. Keeps the weights with the best held-out error and stops
// after `patience` epochs without improvement.
inline std::vector<double> fit_sgd(const linalg::Matrix& z_train, std::span<const double> y_train,
                                   const linalg::Matrix& z_test, std::span<const double> y_test,
                                   const TrainConfig& cfg, std::size_t& epochs_run) {
  const std::size_t dim = z_train.cols();
  const std::size_t m = z_train.rows();
  double y_scale = 0.0;
  for (double y : y_train) y_scale += y * y;
  y_scale = std::sqrt(y_scale / static_cast<double>(m));
  if (!(y_scale > 0.0)) y_scale = 1.0;

  std::vector<double> g(dim, 0.0), mom(dim, 0.0), vel(dim, 0.0), grad(dim);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-7;
  std::uint64_t step = 0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);

  auto test_loss = [&](std::span<const double> coef) {
    double ss = 0.0;
    for (std::size_t i = 0; i < z_test.rows(); ++i) {
      double e = linalg::dot(coef, z_test.row(i)) - y_test[i] / y_scale;
      ss += e * e;
    }
    return ss;
  };

  std::vector<double> best = g;
  double best_loss = z_test.rows() ? test_loss(g) : 0.0;
  std::uint32_t stale = 0;
  epochs_run = 0;
  for (std::uint32_t epoch = 0; epoch < cfg.offline_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < m; start += cfg.offline_batch_size) {
      std::size_t stop = std::min(m, start + cfg.offline_batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        auto row = z_train.row(order[k]);
        double e = linalg::dot(g, row) - y_train[order[k]] / y_scale;
        for (std::size_t n = 0; n < dim; ++n) grad[n] += e * row[n];
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (std::size_t n = 0; n < dim; ++n) {
        double gn = grad[n] * inv;
        mom[n] = b1 * mom[n] + (1.0 - b1) * gn;
        vel[n] = b2 * vel[n] + (1.0 - b2) * gn * gn;
        g[n] -= cfg.initial_lr * (mom[n] / c1) / (std::sqrt(vel[n] / c2) + eps);
      }
    }
    ++epochs_run;
    if (z_test.rows() == 0) {
      best = g;
      continue;
    }
    double loss = test_loss(g);
    if (loss < best_loss) {
      best_loss = loss;
      best = g;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  for (double& v : best) v *= y_scale;
  return best;
}

}  // namespace detail

// Fits weights on the first (1 - split) of the frames and reports errors on
// the held-out tail. Rows are per-frame sums of batch vectors, so the
// coefficients keep their per-batch meaning.
inline OfflineResult offline_train(std::span<const FrameSample> frames, const TrainConfig& cfg) {
  cfg.validate();
  if (frames.empty()) throw InsufficientDataError("offline_train: no frames");
  std::size_t dim = 0;
  for (const FrameSample& f : frames) {
    if (!f.batches.empty()) {
      dim = f.batches.front().size();
      break;
    }
  }
  if (dim == 0) throw InsufficientDataError("offline_train: frames contain no batches");

  std::vector<ExplanatoryVector> rows;
  std::vector<double> y;
  rows.reserve(frames.size());
  for (const FrameSample& f : frames) {
    rows.push_back(aggregate(f.batches, dim));
    y.push_back(f.actual_ms);
  }
  ObservationSet all = make_observations(rows, y);

  const std::size_t m = frames.size();
  const std::size_t n_test = static_cast<std::size_t>(std::floor(static_cast<double>(m) * cfg.train_test_split));
  const std::size_t n_train = m - n_test;
  if (n_train < dim) {
    throw InsufficientDataError("offline_train needs at least " + std::to_string(dim) +
                                " training frames, got " + std::to_string(n_train));
  }
  ObservationSet train{linalg::Matrix(n_train, dim), std::vector<double>(y.begin(), y.begin() + n_train)};
  for (std::size_t i = 0; i < n_train; ++i)
    for (std::size_t c = 0; c < dim; ++c) train.w(i, c) = all.w(i, c);

  OfflineResult out;
  out.report.train_frames = n_train;
  out.report.test_frames = n_test;
  if (cfg.solver == Solver::kSvd) {
    out.weights = fit_svd(train, cfg.rcond);
  } else {
    ModelWeights w = ModelWeights::zeros(dim);
    w.scaler = fit_scaler(train.w);
    linalg::Matrix z_train = standardize_rows(train.w, w.scaler);
    linalg::Matrix z_test(n_test, dim);
    for (std::size_t i = 0; i < n_test; ++i) {
      auto zi = w.scaler.apply(all.w.row(n_train + i));
      for (std::size_t c = 0; c < dim; ++c) z_test(i, c) = zi[c];
    }
    std::span<const double> y_test(y.data() + n_train, n_test);
    std::vector<double> g = detail::fit_sgd(z_train, train.y, z_test, y_test, cfg, out.report.epochs_run);
    w.set_standardized(g);
    w.meta.solver = "sgd";
    w.meta.samples = n_train;
    double rss = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) {
      double e = train.y[i] - predict_batch(w, train.w.row(i));
      rss += e * e;
    }
    w.meta.residual_norm = std::sqrt(rss);
    w.meta.rank = dim;
    out.weights = std::move(w);
  }
  detail::frame_errors(out.weights, all, 0, n_train, out.report.train_mae_ms, out.report.train_rmse_ms);
  detail::frame_errors(out.weights, all, n_train, m, out.report.test_mae_ms, out.report.test_rmse_ms);
  return out;
}

enum class Mode { kOffline, kOnline };

inline const char* mode_name(Mode m) { return m == Mode::kOnline ? "online" : "offline"; }

// The mode-decision machine on its own, driven by precomputed RMSE values.
struct ModeMachine {
  Mode mode = Mode::kOffline;
  std::uint32_t violations = 0;  // n_v

  struct Transition {
    bool entered_online = false;
    bool left_online = false;
  };

  Transition step(double rmse_on, double rmse_off, double threshold, std::uint32_t patience) {
    Transition t;
    if (mode == Mode::kOnline) {
      if (rmse_on > threshold) {
        if (rmse_on > rmse_off) ++violations;
        if (violations > patience) {
          mode = Mode::kOffline;
          violations = 0;
          t.left_online = true;
        }
      }
    } else if (rmse_off > threshold) {
      mode = Mode::kOnline;
      violations = 0;
      t.entered_online = true;
    }
    return t;
  }
};

struct TrainerState {
  TrainConfig config;
  ModelWeights offline_weights;  // frozen after offline_train
  ModelWeights online_weights;
  ModeMachine machine;
  std::deque<EstimatePair> window_on;
  std::deque<EstimatePair> window_off;
  std::uint64_t frame = 0;  // n

  TrainerState(ModelWeights offline, TrainConfig cfg)
      : config(cfg), offline_weights(std::move(offline)), online_weights(offline_weights) {
    config.validate();
  }

  Mode mode() const noexcept { return machine.mode; }

  const ModelWeights& active_weights() const noexcept {
    return machine.mode == Mode::kOnline ? online_weights : offline_weights;
  }

  double rmse_on() const { return window_on.empty() ? 0.0 : sliding_rmse(std::vector<EstimatePair>(window_on.begin(), window_on.end())); }
  double rmse_off() const { return window_off.empty() ? 0.0 : sliding_rmse(std::vector<EstimatePair>(window_off.begin(), window_off.end())); }
};

inline constexpr double kMaxLmsGain = 0.1;

// One LMS epoch over the frame's batches. Each batch's target is its share
// of the actual frame time, proportional to its current prediction (uniform
// when no batch has a positive prediction).
inline void online_step(TrainerState& state, std::span<const ExplanatoryVector> batches, double actual_ms) {
  if (state.mode() != Mode::kOnline) throw InvariantError("online_step called in offline mode");
  if (batches.empty()) return;
  ModelWeights& w = state.online_weights;
  std::vector<double> g = w.standardized();
  std::vector<std::vector<double>> z;
  z.reserve(batches.size());
  std::vector<double> pred(batches.size());
  double total = 0.0, positive = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    if (batches[b].size() != w.dim) throw InvariantError("batch vector dimension mismatch");
    z.push_back(w.scaler.apply(batches[b]));
    pred[b] = linalg::dot(g, z.back());
    total += pred[b];
    positive += std::max(pred[b], 0.0);
  }
  const double residual = actual_ms - total;
  const double eta = state.config.initial_lr;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    double share = positive > 0.0 ? std::max(pred[b], 0.0) / positive : 1.0 / static_cast<double>(batches.size());
    double err = (pred[b] + residual * share) - linalg::dot(g, z[b]);
    if (err == 0.0) continue;
    // Outlying batches get a smaller step so eta * |z|^2 stays within
    // kMaxLmsGain, well inside the LMS stability bound of 2.
    double energy = linalg::dot(z[b], z[b]);
    double step = eta * energy > kMaxLmsGain ? kMaxLmsGain / energy : eta;
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += step * err * z[b][n];
  }
  w.set_standardized(g);
}

// Records the frame's errors and applies one step of the mode machine. On
// entry to online mode the online weights restart from the offline ones and
// inherit the offline error window.
inline ModeMachine::Transition mode_decide(TrainerState& state, double estimate_on, double estimate_off,
                                           double actual_ms) {
  auto push = [&](std::deque<EstimatePair>& win, double est) {
    win.push_back({est, actual_ms});
    while (win.size() > state.config.rmse_window) win.pop_front();
  };
  push(state.window_on, estimate_on);
  push(state.window_off, estimate_off);
  auto t = state.machine.step(state.rmse_on(), state.rmse_off(), state.config.rmse_threshold_ms,
                              state.config.patience);
  if (t.entered_online) {
    state.online_weights = state.offline_weights;
    state.window_on = state.window_off;
  }
  ++state.frame;
  return t;
}

struct FrameLog {
  std::uint64_t frame = 0;
  Mode mode = Mode::kOffline;  // mode whose weights produced `estimate`
  double estimate = 0.0;
  double estimate_on = 0.0;
  double estimate_off = 0.0;
  double actual = 0.0;
  double rmse_on = 0.0;
  double rmse_off = 0.0;
  std::uint32_t n_v = 0;
};

// Per-frame driver: predict() is the runtime path, observe() feeds the
// actual frame time back. With hybrid disabled the offline weights are used
// throughout and the machine never leaves offline mode.
class HybridEstimator {
 public:
  HybridEstimator(ModelWeights offline, TrainConfig cfg, bool hybrid = true)
      : state_(std::move(offline), cfg), hybrid_(hybrid) {}

  double predict(std::span<const ExplanatoryVector> batches) {
    pending_.assign(batches.begin(), batches.end());
    est_off_ = predict_frame(state_.offline_weights, pending_);
    est_on_ = state_.mode() == Mode::kOnline ? predict_frame(state_.online_weights, pending_) : est_off_;
    mode_used_ = state_.mode();
    return mode_used_ == Mode::kOnline ? est_on_ : est_off_;
  }

  FrameLog observe(double actual_ms) {
    FrameLog log;
    log.frame = state_.frame;
    log.mode = mode_used_;
    log.estimate = mode_used_ == Mode::kOnline ? est_on_ : est_off_;
    log.estimate_on = est_on_;
    log.estimate_off = est_off_;
    log.actual = actual_ms;
    if (hybrid_) {
      mode_decide(state_, est_on_, est_off_, actual_ms);
      if (state_.mode() == Mode::kOnline) online_step(state_, pending_, actual_ms);
    } else {
      state_.window_off.push_back({est_off_, actual_ms});
      while (state_.window_off.size() > state_.config.rmse_window) state_.window_off.pop_front();
      state_.window_on = state_.window_off;
      ++state_.frame;
    }
    log.rmse_on = state_.rmse_on();
    log.rmse_off = state_.rmse_off();
    log.n_v = state_.machine.violations;
    return log;
  }

  const TrainerState& state() const noexcept { return state_; }

 private:
  TrainerState state_;
  bool hybrid_;
  std::vector<ExplanatoryVector> pending_;
  double est_on_ = 0.0;
  double est_off_ = 0.0;
  Mode mode_used_ = Mode::kOffline;
};

}  // namespace gamorra
