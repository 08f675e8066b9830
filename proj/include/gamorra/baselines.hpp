#pragma once

// Comparison predictors. AR is an LMS autoregression over recent frametimes,
// FCM a frame complexity model over per-frame counts. FRQ scales the last
// frametime by the clock change.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "gamorra/error.hpp"
#include "gamorra/linalg.hpp"
#include "gamorra/trace.hpp"

namespace gamorra {

// Normalized LMS over the last `kOrder` frametimes, most recent first.
// Until the history is full the prediction is the last observed frametime.
class ArPredictor {
 public:
  static constexpr std::size_t kOrder = 10;

  explicit ArPredictor(double lr = 0.1) : lr_(lr) { coef_.fill(1.0 / kOrder); }

  double predict() const {
    if (history_.empty()) return 0.0;
    if (history_.size() < kOrder) return history_.front();
    double p = 0.0;
    for (std::size_t i = 0; i < kOrder; ++i) p += coef_[i] * history_[i];
    return p;
  }

  // One LMS step with the error of the prediction made for this frame,
  // then the frametime joins the history.
  void update(double actual_ms) {
    if (history_.size() == kOrder) {
      double e = actual_ms - predict();
      double energy = 0.0;
      for (double h : history_) energy += h * h;
      if (energy > 0.0) {
        for (std::size_t i = 0; i < kOrder; ++i) coef_[i] += lr_ * e * history_[i] / energy;
      }
    }
    history_.push_front(actual_ms);
    if (history_.size() > kOrder) history_.pop_back();
  }

  const std::array<double, kOrder>& coefficients() const noexcept { return coef_; }

 private:
  double lr_;
  std::array<double, kOrder> coef_{};
  std::deque<double> history_;
};

// Per-frame FCM inputs: total vertices, texture bytes and API commands.
// Texture bytes are approximated by the RGBA8 size of each shaded batch's
// render target, the only texture-sized quantity a trace carries.
struct FcmFeatures {
  double vertices = 0.0;
  double texture_bytes = 0.0;
  double commands = 0.0;
};

inline FcmFeatures fcm_features(const FrameRecord& f) {
  FcmFeatures x;
  for (const BatchRecord& b : f.batches) {
    x.vertices += static_cast<double>(b.vertex_count);
    if (b.ps_shader) x.texture_bytes += 4.0 * static_cast<double>(b.rt_width) * static_cast<double>(b.rt_height);
    x.commands += 1.0;
  }
  return x;
}

// prediction = scale * (V/3 * nu + T/3 * tau + C/3 * kappa) + intercept.
// The three inputs keep their fixed 1/3 weights; the normalizers, scale
// and intercept come from a least-squares calibration.
class FcmPredictor {
 public:
  explicit FcmPredictor(bool intercept = true) : use_intercept_(intercept) {}

  void calibrate(std::span<const FcmFeatures> frames, std::span<const double> actual_ms) {
    if (frames.size() != actual_ms.size()) throw InvariantError("fcm calibration: length mismatch");
    const std::size_t k = use_intercept_ ? 4 : 3;
    if (frames.size() < k) throw InsufficientDataError("fcm calibration needs at least " + std::to_string(k) + " frames");
    linalg::Matrix a(frames.size(), k);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      a(i, 0) = frames[i].vertices;
      a(i, 1) = frames[i].texture_bytes;
      a(i, 2) = frames[i].commands;
      if (use_intercept_) a(i, 3) = 1.0;
    }
    // Column scaling keeps the rank cutoff meaningful across units.
    std::vector<double> col_scale(k, 1.0);
    for (std::size_t c = 0; c < k; ++c) {
      double ss = 0.0;
      for (std::size_t i = 0; i < frames.size(); ++i) ss += a(i, c) * a(i, c);
      if (ss > 0.0) col_scale[c] = std::sqrt(ss / static_cast<double>(frames.size()));
      for (std::size_t i = 0; i < frames.size(); ++i) a(i, c) /= col_scale[c];
    }
    auto sol = linalg::lstsq(a, actual_ms, 1e-10);
    double mean = 0.0;
    for (double y : actual_ms) mean += y;
    scale_ = mean / static_cast<double>(actual_ms.size());
    if (!(scale_ > 0.0)) throw InvariantError("fcm calibration: mean frametime must be > 0");
    nu_ = 3.0 * sol.x[0] / col_scale[0] / scale_;
    tau_ = 3.0 * sol.x[1] / col_scale[1] / scale_;
    kappa_ = 3.0 * sol.x[2] / col_scale[2] / scale_;
    intercept_ = use_intercept_ ? sol.x[3] / col_scale[3] : 0.0;
    calibrated_ = true;
  }

  double predict(const FcmFeatures& x) const {
    if (!calibrated_) throw InvariantError("fcm predictor used before calibration");
    return scale_ * (x.vertices / 3.0 * nu_ + x.texture_bytes / 3.0 * tau_ + x.commands / 3.0 * kappa_) + intercept_;
  }

  bool calibrated() const noexcept { return calibrated_; }
  bool has_intercept() const noexcept { return use_intercept_; }
  double scale() const noexcept { return scale_; }
  double intercept() const noexcept { return intercept_; }
  std::array<double, 3> normalizers() const noexcept { return {nu_, tau_, kappa_}; }

 private:
  bool use_intercept_;
  bool calibrated_ = false;
  double scale_ = 1.0;
  double nu_ = 0.0, tau_ = 0.0, kappa_ = 0.0;
  double intercept_ = 0.0;
};

// prediction = last * (last_freq / freq)^s, with s in [0, 1] adapted by one
// normalized LMS step per frame.
class FrqPredictor {
 public:
  explicit FrqPredictor(double lr = 0.2) : lr_(lr) {}

  double predict(double freq_mhz) const {
    if (!(freq_mhz > 0.0)) throw InvariantError("frequency must be > 0");
    if (!last_ms_) return 0.0;
    return *last_ms_ * std::pow(last_freq_ / freq_mhz, s_);
  }

  void update(double freq_mhz, double actual_ms) {
    if (!(freq_mhz > 0.0)) throw InvariantError("frequency must be > 0");
    if (last_ms_ && freq_mhz != last_freq_) {
      double pred = predict(freq_mhz);
      double grad = pred * std::log(last_freq_ / freq_mhz);
      if (grad != 0.0) s_ = std::clamp(s_ + lr_ * (actual_ms - pred) / grad, 0.0, 1.0);
    }
    last_ms_ = actual_ms;
    last_freq_ = freq_mhz;
  }

  double sensitivity() const noexcept { return s_; }

 private:
  double lr_;
  double s_ = 1.0;
  std::optional<double> last_ms_;
  double last_freq_ = 0.0;
};

}  // namespace gamorra
