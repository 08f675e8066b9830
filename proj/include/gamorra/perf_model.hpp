#pragma once

// Benchmark-derived performance functions: monotone piecewise-linear maps
// from a stage's load to its marginal processing time (ms), plus per-stage
// opcode cost tables and the core count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gamorra/error.hpp"
#include "gamorra/il.hpp"
#include "gamorra/stage.hpp"

namespace gamorra {

struct PerfPoint {
  double load = 0.0;
  double ms = 0.0;

  bool operator==(const PerfPoint&) const = default;
};

class PerfFunction {
 public:
  PerfFunction() : breakpoints_{{0.0, 0.0}} {}

  // Breakpoints must start at (0, 0), have strictly increasing loads and
  // non-decreasing times.
  explicit PerfFunction(std::vector<PerfPoint> breakpoints) : breakpoints_(std::move(breakpoints)) {
    if (breakpoints_.empty() || breakpoints_.front().load != 0.0 || breakpoints_.front().ms != 0.0) {
      throw InvariantError("perf function must start at (0, 0)");
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i].load > breakpoints_[i - 1].load)) {
        throw InvariantError("perf function loads must be strictly increasing");
      }
      if (breakpoints_[i].ms < breakpoints_[i - 1].ms || !std::isfinite(breakpoints_[i].ms)) {
        throw InvariantError("perf function times must be non-decreasing");
      }
    }
  }

  const std::vector<PerfPoint>& breakpoints() const noexcept { return breakpoints_; }

  // Slope used past the last breakpoint: the last segment's slope.
  double extrapolation_slope() const noexcept {
    if (breakpoints_.size() < 2) return 0.0;
    const PerfPoint& a = breakpoints_[breakpoints_.size() - 2];
    const PerfPoint& b = breakpoints_.back();
    return (b.ms - a.ms) / (b.load - a.load);
  }

  double max_load() const noexcept { return breakpoints_.back().load; }

  // Piecewise-linear interpolation, linear extrapolation past the end.
  // Loads at or below zero map to zero.
  double operator()(double load) const noexcept {
    if (!(load > 0.0)) return 0.0;
    const PerfPoint& last = breakpoints_.back();
    if (load >= last.load) return last.ms + (load - last.load) * extrapolation_slope();
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), load,
                               [](double l, const PerfPoint& p) { return l < p.load; });
    const PerfPoint& hi = *it;
    const PerfPoint& lo = *(it - 1);
    if (load == lo.load) return lo.ms;
    double t = (load - lo.load) / (hi.load - lo.load);
    return lo.ms + t * (hi.ms - lo.ms);
  }

  bool operator==(const PerfFunction&) const = default;

 private:
  std::vector<PerfPoint> breakpoints_;
};

inline double eval_perf(const PerfFunction& fn, double load) noexcept { return fn(load); }

// Builds a monotone function from raw (load, total ms) benchmark samples:
// subtracts the empty-pipeline baseline, clamps at zero, sorts by load,
// applies a running maximum and anchors the curve at (0, 0).
inline PerfFunction build_perf_function(std::vector<PerfPoint> samples, double baseline_ms) {
  if (samples.size() < 2) throw InsufficientDataError("perf function needs at least 2 samples");
  std::sort(samples.begin(), samples.end(),
            [](const PerfPoint& a, const PerfPoint& b) { return a.load < b.load; });
  std::vector<PerfPoint> pts{{0.0, 0.0}};
  double running = 0.0;
  for (const PerfPoint& s : samples) {
    if (s.load < 0.0 || !std::isfinite(s.load) || !std::isfinite(s.ms)) {
      throw InvariantError("perf samples must have finite, non-negative loads");
    }
    if (s.load == 0.0) continue;
    if (s.load == pts.back().load) throw InvariantError("perf sample loads must be distinct");
    running = std::max(running, std::max(0.0, s.ms - baseline_ms));
    pts.push_back({s.load, running});
  }
  if (pts.size() < 2) throw InsufficientDataError("perf function needs a sample with load > 0");
  return PerfFunction(std::move(pts));
}

struct PerfModel {
  std::uint32_t omega = 1;
  double beta0_baseline_ms = 0.0;
  std::array<std::optional<PerfFunction>, kStageCount> functions;
  std::array<OpcodeCostTable, kStageCount> opcodes;
  // Fraction of PS/OM load removed by early-z, from the depth-only benchmark.
  std::optional<double> early_z_discount;

  PerfModel() {
    for (Stage s : kAllStages) opcodes[index_of(s)].stage = s;
  }

  bool has(Stage s) const noexcept { return functions[index_of(s)].has_value(); }

  const PerfFunction& function(Stage s) const {
    const auto& f = functions[index_of(s)];
    if (!f) throw MissingDataError("perf model has no function for stage " + std::string(stage_name(s)));
    return *f;
  }

  // The patch constant function runs on hull shader hardware and shares its
  // opcode table.
  const OpcodeCostTable& costs(Stage s) const { return opcodes[index_of(s)]; }

  bool operator==(const PerfModel&) const = default;
};

inline void validate_perf_model(const PerfModel& m) {
  if (m.omega < 1) throw InvariantError("omega must be >= 1");
  for (std::size_t i = 0; i < kGraphicsStageCount; ++i) {
    if (!m.functions[i]) {
      throw InvariantError("perf model missing stage " + std::string(stage_name(kAllStages[i])));
    }
  }
  for (Stage s : kAllStages) {
    for (const auto& [op, ms] : m.opcodes[index_of(s)].cost) {
      if (!(ms > 0.0) || !std::isfinite(ms)) {
        throw InvariantError("opcode cost must be > 0: " + op + " in " + std::string(stage_name(s)));
      }
      if (is_pixel_only_opcode(op) && s != Stage::kPS) {
        throw InvariantError("opcode " + op + " is only valid in ps, found in " +
                             std::string(stage_name(s)));
      }
    }
    if (!is_programmable(s) && !m.opcodes[index_of(s)].empty()) {
      throw InvariantError("fixed-function stage " + std::string(stage_name(s)) + " has opcodes");
    }
  }
}

inline nlohmann::json perf_model_to_json(const PerfModel& m) {
  nlohmann::json j;
  j["omega"] = m.omega;
  j["beta0_baseline_ms"] = m.beta0_baseline_ms;
  nlohmann::json stages = nlohmann::json::object();
  for (Stage s : kAllStages) {
    const auto& f = m.functions[index_of(s)];
    const auto& ops = m.opcodes[index_of(s)].cost;
    if (!f && ops.empty()) continue;
    nlohmann::json sj;
    nlohmann::json bp = nlohmann::json::array();
    if (f) {
      for (const PerfPoint& p : f->breakpoints()) bp.push_back({p.load, p.ms});
    }
    sj["breakpoints"] = bp;
    sj["opcodes"] = nlohmann::json::object();
    for (const auto& [op, ms] : ops) sj["opcodes"][op] = ms;
    stages[std::string(stage_name(s))] = sj;
  }
  j["stages"] = stages;
  if (m.early_z_discount) j["meta"]["early_z_discount"] = *m.early_z_discount;
  return j;
}

inline PerfModel perf_model_from_json(const nlohmann::json& j) {
  try {
    PerfModel m;
    int omega = j.at("omega").get<int>();
    if (omega < 1) throw InvariantError("omega must be >= 1");
    m.omega = static_cast<std::uint32_t>(omega);
    m.beta0_baseline_ms = j.at("beta0_baseline_ms").get<double>();
    for (const auto& [name, sj] : j.at("stages").items()) {
      auto stage = stage_from_name(name);
      if (!stage) throw InvariantError("unknown stage '" + name + "'");
      const auto& bp = sj.at("breakpoints");
      if (!bp.empty()) {
        std::vector<PerfPoint> pts;
        for (const auto& p : bp) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        m.functions[index_of(*stage)] = PerfFunction(std::move(pts));
      }
      if (sj.contains("opcodes")) {
        for (const auto& [op, ms] : sj["opcodes"].items()) {
          m.opcodes[index_of(*stage)].cost[op] = ms.get<double>();
        }
      }
    }
    if (j.contains("meta") && j["meta"].contains("early_z_discount")) {
      m.early_z_discount = j["meta"]["early_z_discount"].get<double>();
    }
    validate_perf_model(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed perf model: ") + e.what());
  }
}

inline void save_perf_model(const PerfModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << perf_model_to_json(m).dump(2) << '\n';
  if (!out) throw Error("cannot write perf model: " + path.string());
}

inline PerfModel load_perf_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open perf model: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("malformed perf model " + path.string() + ": " + e.what());
  }
  return perf_model_from_json(j);
}

}  // namespace gamorra
