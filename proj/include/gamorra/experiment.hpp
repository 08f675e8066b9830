#pragma once

// End-to-end pipelines shared by the CLI and the acceptance suite. A trace
// can be fitted, streamed through the estimator, or used to compare the
// estimator with the baselines.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gamorra/baselines.hpp"
#include "gamorra/error.hpp"
#include "gamorra/metrics.hpp"
#include "gamorra/mlr.hpp"
#include "gamorra/perf_model.hpp"
#include "gamorra/sim.hpp"
#include "gamorra/trace.hpp"
#include "gamorra/trainer.hpp"
#include "gamorra/workload.hpp"

namespace gamorra {

inline void check_actuals(const FrameSequence& seq, const Actuals& actuals) {
  if (seq.frames.size() != actuals.actual_ms.size()) {
    throw InvariantError("trace has " + std::to_string(seq.frames.size()) + " frames but actuals has " +
                         std::to_string(actuals.actual_ms.size()) + " rows");
  }
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    if (seq.frames[i].frame_index != actuals.frame[i]) {
      throw InvariantError("actuals row " + std::to_string(i) + " is for frame " + std::to_string(actuals.frame[i]) +
                           ", trace has frame " + std::to_string(seq.frames[i].frame_index));
    }
  }
}

inline FrameFeaturizer make_featurizer(const FrameSequence& seq, const PerfModel& perf) {
  return FrameFeaturizer(perf, parse_shader_store(seq.shader_store), layout_for(seq));
}

inline std::vector<FrameSample> frame_samples(const FrameFeaturizer& fz, std::span<const FrameRecord> frames,
                                              std::span<const double> actual_ms) {
  std::vector<FrameSample> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out.push_back({fz.frame_vectors(frames[i]), actual_ms[i]});
  return out;
}

// Offline training on every frame of the trace.
inline OfflineResult fit_trace(const FrameSequence& seq, const Actuals& actuals, const PerfModel& perf,
                               const TrainConfig& cfg) {
  check_actuals(seq, actuals);
  FrameFeaturizer fz = make_featurizer(seq, perf);
  std::vector<FrameSample> samples = frame_samples(fz, seq.frames, actuals.actual_ms);
  return offline_train(samples, cfg);
}

// Streams the trace through the estimator, one predict/observe per frame.
inline std::vector<FrameLog> run_trace(const FrameSequence& seq, const Actuals& actuals, const PerfModel& perf,
                                       const ModelWeights& weights, const TrainConfig& cfg, bool hybrid) {
  check_actuals(seq, actuals);
  FrameFeaturizer fz = make_featurizer(seq, perf);
  if (fz.layout().dimension() != weights.dim) {
    throw InvariantError("weights have dimension " + std::to_string(weights.dim) + " but the trace needs " +
                         std::to_string(fz.layout().dimension()));
  }
  HybridEstimator est(weights, cfg, hybrid);
  std::vector<FrameLog> logs;
  logs.reserve(seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    est.predict(fz.frame_vectors(seq.frames[i]));
    FrameLog log = est.observe(actuals.actual_ms[i]);
    log.frame = seq.frames[i].frame_index;
    logs.push_back(log);
  }
  return logs;
}

inline constexpr const char* kFrameLogHeader = "frame,mode,estimate_on,estimate_off,actual,rmse_on,rmse_off,n_v";

inline std::string frame_log_csv(std::span<const FrameLog> logs, const std::string& mode_override = {}) {
  std::ostringstream os;
  os << kFrameLogHeader << '\n';
  for (const FrameLog& l : logs) {
    os << l.frame << ',' << (mode_override.empty() ? mode_name(l.mode) : mode_override.c_str()) << ','
       << fixed6(l.estimate_on) << ',' << fixed6(l.estimate_off) << ',' << fixed6(l.actual) << ','
       << fixed6(l.rmse_on) << ',' << fixed6(l.rmse_off) << ',' << l.n_v << '\n';
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

inline const std::vector<std::string>& known_models() {
  static const std::vector<std::string> names = {"gm-h", "gm-of", "ar", "fcm", "frq"};
  return names;
}

struct CompareOptions {
  std::string scenario = "scenario";
  std::uint64_t seed = 0;
  double mfr_margin = 0.0;
  bool timing = false;  // wall-clock overhead and RSS columns
  bool fcm_intercept = true;
};

struct CompareOutput {
  std::vector<ModelResult> results;                // in known_models() order
  std::map<std::string, std::vector<FrameLog>> logs;  // per model, evaluated frames only
  TrainReport train_report;
};

// Trains on the first offline_frame_count frames and evaluates every
// requested model on the remaining frames. The online baselines also see
// the training frames so their history is warm when evaluation starts.
inline CompareOutput compare_models(const FrameSequence& seq, const Actuals& actuals, const PerfModel& perf,
                                    const TrainConfig& cfg, std::vector<std::string> models,
                                    const CompareOptions& opts = {}) {
  for (const std::string& m : models) {
    if (std::find(known_models().begin(), known_models().end(), m) == known_models().end()) {
      throw InvariantError("unknown model '" + m + "'");
    }
  }
  check_actuals(seq, actuals);
  const std::size_t n_train = cfg.offline_frame_count;
  const std::size_t n = seq.frames.size();
  if (n <= n_train) {
    throw InsufficientDataError("compare needs more than " + std::to_string(n_train) + " frames, got " +
                                std::to_string(n));
  }
  auto wants = [&](const char* m) { return std::find(models.begin(), models.end(), m) != models.end(); };
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  std::span<const double> actual(actuals.actual_ms);
  std::span<const double> test_actual = actual.subspan(n_train);

  CompareOutput out;
  std::map<std::string, ModelResult> results;
  auto finish = [&](const std::string& name, const std::vector<double>& est, const std::vector<double>& timing,
                    std::vector<FrameLog> logs) {
    ModelResult r = summarize(name, opts.scenario, opts.seed, est, test_actual, opts.mfr_margin);
    if (opts.timing) {
      r.overhead = overhead_report(timing, test_actual);
      r.rss = rss_mb();
    }
    results[name] = r;
    out.logs[name] = std::move(logs);
  };
  auto baseline_logs = [&](const std::vector<double>& est) {
    std::vector<FrameLog> logs;
    std::deque<EstimatePair> window;
    for (std::size_t i = 0; i < est.size(); ++i) {
      window.push_back({est[i], test_actual[i]});
      while (window.size() > cfg.rmse_window) window.pop_front();
      double rmse = sliding_rmse(std::vector<EstimatePair>(window.begin(), window.end()));
      FrameLog l;
      l.frame = seq.frames[n_train + i].frame_index;
      l.estimate = l.estimate_on = l.estimate_off = est[i];
      l.actual = test_actual[i];
      l.rmse_on = l.rmse_off = rmse;
      logs.push_back(l);
    }
    return logs;
  };

  if (wants("gm-h") || wants("gm-of")) {
    FrameFeaturizer fz = make_featurizer(seq, perf);
    std::vector<FrameSample> train =
        frame_samples(fz, std::span(seq.frames).first(n_train), actual.first(n_train));
    OfflineResult fit = offline_train(train, cfg);
    out.train_report = fit.report;
    for (const char* name : {"gm-h", "gm-of"}) {
      if (!wants(name)) continue;
      HybridEstimator est(fit.weights, cfg, std::string(name) == "gm-h");
      std::vector<double> estimates, timing;
      std::vector<FrameLog> logs;
      for (std::size_t i = n_train; i < n; ++i) {
        auto t0 = clock::now();
        double e = est.predict(fz.frame_vectors(seq.frames[i]));
        if (opts.timing) timing.push_back(ms_since(t0));
        estimates.push_back(e);
        FrameLog l = est.observe(actual[i]);
        l.frame = seq.frames[i].frame_index;
        logs.push_back(l);
      }
      finish(name, estimates, timing, std::move(logs));
    }
  }
  if (wants("ar")) {
    ArPredictor ar;
    std::vector<double> estimates, timing;
    for (std::size_t i = 0; i < n; ++i) {
      auto t0 = clock::now();
      double e = ar.predict();
      if (i >= n_train) {
        if (opts.timing) timing.push_back(ms_since(t0));
        estimates.push_back(e);
      }
      ar.update(actual[i]);
    }
    finish("ar", estimates, timing, baseline_logs(estimates));
  }
  if (wants("fcm")) {
    FcmPredictor fcm(opts.fcm_intercept);
    std::vector<FcmFeatures> feats;
    for (const FrameRecord& f : seq.frames) feats.push_back(fcm_features(f));
    fcm.calibrate(std::span(feats).first(n_train), actual.first(n_train));
    std::vector<double> estimates, timing;
    for (std::size_t i = n_train; i < n; ++i) {
      auto t0 = clock::now();
      double e = fcm.predict(fcm_features(seq.frames[i]));
      if (opts.timing) timing.push_back(ms_since(t0));
      estimates.push_back(e);
    }
    finish("fcm", estimates, timing, baseline_logs(estimates));
  }
  if (wants("frq")) {
    FrqPredictor frq;
    std::vector<double> estimates, timing;
    for (std::size_t i = 0; i < n; ++i) {
      double f = actuals.freq_mhz[i] > 0.0 ? actuals.freq_mhz[i] : 1.0;
      auto t0 = clock::now();
      double e = frq.predict(f);
      if (i >= n_train) {
        if (opts.timing) timing.push_back(ms_since(t0));
        estimates.push_back(e);
      }
      frq.update(f, actual[i]);
    }
    finish("frq", estimates, timing, baseline_logs(estimates));
  }
  for (const std::string& name : known_models()) {
    if (results.contains(name)) out.results.push_back(results[name]);
  }
  return out;
}

}  // namespace gamorra
