#pragma once

// Benchmark suite run against a simulated GPU: the empty-pipeline
// baseline, per-opcode microbenchmarks and per-stage load sweeps, assembled
// into a PerfModel. The simulator is treated as a black box that renders a
// frame and returns its time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gamorra/error.hpp"
#include "gamorra/il.hpp"
#include "gamorra/perf_model.hpp"
#include "gamorra/sim.hpp"
#include "gamorra/stage.hpp"
#include "gamorra/trace.hpp"
#include "gamorra/workload.hpp"

namespace gamorra {

struct BenchConfig {
  double cap_ms = 100.0;
  std::uint32_t repetitions = 9;
  double factor = 1.5;
  std::uint32_t max_steps = 64;
  std::uint32_t ras_om_rounds = 3;
  // Every opcode is timed at the same added frame time, this fraction of
  // the cap, so curvature of the stage's cost affects all costs alike.
  double opcode_signal_fraction = 0.05;
  std::uint32_t opcode_repetitions = 49;
  std::uint64_t seed = 0;
  std::map<Stage, double> min_load = {
      {Stage::kIA, 1024},  {Stage::kVS, 64},  {Stage::kHS, 64}, {Stage::kTess, 64}, {Stage::kDS, 64},
      {Stage::kGS, 64},    {Stage::kRas, 1024}, {Stage::kPS, 64}, {Stage::kOM, 64},  {Stage::kCS, 64}};

  void validate() const {
    if (!(cap_ms > 0.0)) throw InvariantError("cap_ms must be > 0");
    if (repetitions < 1) throw InvariantError("repetitions must be >= 1");
    if (!(factor > 1.0)) throw InvariantError("sweep factor must be > 1");
    if (max_steps < 2) throw InvariantError("max_steps must be >= 2");
  }
};

// One sweep point. `load` is the swept stage's load in model units, `time_ms`
// the whole frame's measured time and `marginal_ms` the time attributed to
// the swept stage (times omega).
struct SweepSample {
  double load = 0.0;
  double time_ms = 0.0;
  double marginal_ms = 0.0;
  bool significant = true;  // marginal time clears the measurement noise
};

struct SweepResult {
  Stage stage = Stage::kIA;
  std::vector<SweepSample> samples;
};

class BenchRunner {
 public:
  explicit BenchRunner(GpuProfile profile, BenchConfig cfg = {})
      : profile_(std::move(profile)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    profile_.validate();
    cfg_.validate();
    for (Stage s : kAllStages) model_.opcodes[index_of(s)].stage = s;
    model_.omega = profile_.omega;
    for (Stage s : kAllStages) {
      if (!is_programmable(s)) continue;
      add_program(pass_id(s), {{"mov", 1}});
    }
    add_program("pass_pcf", {{"mov", 1}});
  }

  const PerfModel& model() const noexcept { return model_; }
  const GpuProfile& profile() const noexcept { return profile_; }

  // Median of the configured repetitions of an empty frame.
  double measure_baseline() {
    FrameRecord empty;
    double b = measure(empty);
    model_.beta0_baseline_ms = b;
    return b;
  }

  // op_j = omega * (time with `iterations` extra copies - time without) /
  // iterations, measured at one invocation.
  double bench_opcode(Stage s, const std::string& op, std::uint64_t iterations) {
    if (!is_programmable(s)) throw InvariantError("stage " + std::string(stage_name(s)) + " has no opcodes");
    if (iterations < 1) throw InvariantError("iterations must be >= 1");
    if (is_pixel_only_opcode(op) && s != Stage::kPS) {
      throw InvariantError("opcode " + op + " is only valid in ps");
    }
    double delta = opcode_delta(s, op, iterations, cfg_.opcode_repetitions);
    double cost = static_cast<double>(profile_.omega) * delta / static_cast<double>(iterations);
    if (!(cost > 0.0)) {
      throw InvariantError("non-positive measurement for opcode '" + op + "' in stage " +
                           std::string(stage_name(s)));
    }
    return cost;
  }

  // Benchmarks one opcode with the iteration count that adds the target
  // time, found by growing a probe tenfold and then scaling it.
  double bench_opcode_auto(Stage s, const std::string& op) {
    const double target = cfg_.opcode_signal_fraction * cfg_.cap_ms;
    std::uint64_t iterations = 1000;
    double probe = 0.0;
    for (int step = 0; step < 12; ++step) {
      probe = opcode_delta(s, op, iterations, cfg_.repetitions);
      if (probe >= 0.2 * target) break;
      iterations *= 10;
    }
    if (probe > 0.0) {
      double scaled = std::round(static_cast<double>(iterations) * target / probe);
      iterations = static_cast<std::uint64_t>(std::max(1.0, scaled));
    }
    return bench_opcode(s, op, iterations);
  }

  // Fills the stage's opcode table (vocabulary plus any opcode the profile
  // declares for it).
  const OpcodeCostTable& bench_opcode_table(Stage s) {
    std::set<std::string> ops;
    for (const OpcodeInfo& o : kOpcodeVocabulary) {
      if (!o.pixel_only || s == Stage::kPS) ops.insert(o.name);
    }
    for (const auto& [op, _] : profile_.opcode_ms[index_of(s)]) ops.insert(op);
    auto& table = model_.opcodes[index_of(s)];
    table.cost.clear();
    for (const std::string& op : ops) table.cost[op] = bench_opcode_auto(s, op);
    return table;
  }

  // Geometric sweep from the stage's minimum load, stopping at the first
  // sample above the cap (kept as the last sample).
  SweepResult sweep_stage(Stage s) {
    RawSweep raw = record_sweep(s);
    SweepResult out = finalize(raw, {});
    model_.functions[index_of(s)] = to_function(out);
    return out;
  }

  // Separates rasterizer from output-merger time. Both sweeps raise the
  // fragment count; the ras sweep renders to a 1x1 target and the om sweep
  // to 1280x720, and each is corrected with the other's current estimate.
  std::pair<SweepResult, SweepResult> sweep_ras_om() {
    RawSweep ras = record_sweep(Stage::kRas);
    RawSweep om = record_sweep(Stage::kOM);
    std::pair<SweepResult, SweepResult> out;
    model_.functions[index_of(Stage::kOM)].reset();
    for (std::uint32_t round = 0; round < std::max<std::uint32_t>(1, cfg_.ras_om_rounds); ++round) {
      out.first = finalize(ras, {Stage::kOM});
      model_.functions[index_of(Stage::kRas)] = to_function(out.first);
      out.second = finalize(om, {});
      model_.functions[index_of(Stage::kOM)] = to_function(out.second);
    }
    return out;
  }

  // Fraction of PS/OM work removed by early-z: the same heavy pixel batch
  // timed with and without the depth-only pre-pass.
  double bench_early_z() {
    BatchRecord b = stage_batch(Stage::kPS);
    b.fragment_count = 4096;
    std::string id = "bench_ps_early_z";
    add_program(id, {{"mov", 1}, {"add", 1000}});
    BatchRecord setup = b;
    b.ps_shader = id;
    SimConditions on, off;
    off.early_z = false;
    double d_on = measure(frame_of(b), on) - measure(frame_of(setup), on);
    double d_off = measure(frame_of(b), off) - measure(frame_of(setup), off);
    double discount = d_off > 0.0 ? std::clamp(1.0 - d_on / d_off, 0.0, 1.0) : 0.0;
    model_.early_z_discount = discount;
    return discount;
  }

  // Baseline and opcode tables first. Stage sweeps follow in an order where
  // each sweep only depends on stages already measured.
  PerfModel run_suite(std::vector<SweepResult>* sweeps = nullptr) {
    measure_baseline();
    std::vector<Stage> shader_stages = {Stage::kVS, Stage::kHS, Stage::kDS, Stage::kGS, Stage::kPS};
    if (profile_.has(Stage::kCS)) shader_stages.push_back(Stage::kCS);
    for (Stage s : shader_stages) bench_opcode_table(s);
    std::vector<SweepResult> all;
    for (Stage s : {Stage::kIA, Stage::kVS, Stage::kHS, Stage::kTess, Stage::kDS, Stage::kGS, Stage::kPS}) {
      all.push_back(sweep_stage(s));
    }
    if (profile_.has(Stage::kCS)) all.push_back(sweep_stage(Stage::kCS));
    auto [ras, om] = sweep_ras_om();
    all.push_back(ras);
    all.push_back(om);
    bench_early_z();
    validate_perf_model(model_);
    if (sweeps) *sweeps = std::move(all);
    return model_;
  }

 private:
  struct Measurement {
    double ms = 0.0;
    double se = 0.0;  // standard error of the median, from the MAD
  };
  struct RawSample {
    BatchRecord batch;
    double time_ms = 0.0;
    double se = 0.0;
  };
  struct RawSweep {
    Stage stage = Stage::kIA;
    BatchRecord setup;
    double setup_ms = 0.0;
    double setup_se = 0.0;
    std::vector<RawSample> samples;
  };

  static std::string pass_id(Stage s) { return "pass_" + std::string(stage_name(s)); }
  static std::string bench_id(Stage s) { return "bench_" + std::string(stage_name(s)); }

  void add_program(const std::string& id, std::map<std::string, std::uint64_t> histogram) {
    ShaderProgram p;
    p.id = id;
    for (const auto& [op, n] : histogram) p.total_ops += n;
    p.histogram = std::move(histogram);
    shaders_[id] = std::move(p);
  }

  static FrameRecord frame_of(const BatchRecord& b) {
    FrameRecord f;
    f.batches.push_back(b);
    return f;
  }

  double measure(const FrameRecord& f, const SimConditions& cond = {}) { return measure_se(f, cond).ms; }

  Measurement measure_se(const FrameRecord& f, const SimConditions& cond = {}) {
    std::vector<double> t(cfg_.repetitions);
    for (double& v : t) v = simulate_frame(profile_, f, shaders_, cond, rng_);
    auto median = [](std::vector<double> v) {
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
      return v[v.size() / 2];
    };
    Measurement m;
    m.ms = median(t);
    for (double& v : t) v = std::abs(v - m.ms);
    // 1.4826 * MAD estimates sigma; the median's error is ~1.2533 sigma/sqrt(R).
    m.se = 1.4826 * median(t) * 1.2533 / std::sqrt(static_cast<double>(t.size()));
    return m;
  }

  // A minimal batch exercising `s` with every other shader pass-through: a
  // textured quad (4 vertices, one fragment on a 1x1 target) for the
  // rasterizing stages, one invocation for the swept shader stage.
  BatchRecord stage_batch(Stage s) const {
    BatchRecord b;
    if (s == Stage::kCS) {
      b.cs_shader = pass_id(Stage::kCS);
      b.cs_input_count = 1;
      return b;
    }
    b.vertex_count = 4;
    b.ia_bytes = 4 * 32;
    b.attr_count = 8;
    b.vs_shader = pass_id(Stage::kVS);
    b.fragment_count = 1;
    b.rt_width = 1;
    b.rt_height = 1;
    b.ps_shader = pass_id(Stage::kPS);
    if (s == Stage::kHS || s == Stage::kTess || s == Stage::kDS) {
      b.hs_shader = pass_id(Stage::kHS);
      b.pcf_shader = "pass_pcf";
      b.ds_shader = pass_id(Stage::kDS);
      b.patch_count = 1;
      b.tess_points_per_patch = {1};
      b.ds_vertex_count = 1;
    }
    if (s == Stage::kGS) {
      b.gs_shader = pass_id(Stage::kGS);
      b.gs_vertex_count = 1;
    }
    if (s == Stage::kVS) {
      b.vertex_count = 1;
      b.ia_bytes = 32;
    }
    if (s == Stage::kHS) b.vertex_count = 1;
    if (s == Stage::kOM) {
      b.rt_width = 1280;
      b.rt_height = 720;
    }
    return b;
  }

  // The batch with the swept quantity set to `amount` (an op count for
  // shader stages, a raw count otherwise). amount 0 is the setup batch.
  BatchRecord swept_batch(Stage s, double amount) {
    BatchRecord b = stage_batch(s);
    auto n = static_cast<std::uint64_t>(amount);
    switch (s) {
      case Stage::kIA:
        b.ia_bytes = n;
        break;
      case Stage::kTess:
        b.tess_points_per_patch = {n};
        break;
      case Stage::kRas:
      case Stage::kOM:
        b.fragment_count = n;
        break;
      default: {
        if (n == 0) break;
        std::string id = bench_id(s) + "_" + std::to_string(n);
        if (!shaders_.contains(id)) add_program(id, {{"mov", 1}, {"add", n}});
        if (s == Stage::kVS) b.vs_shader = id;
        if (s == Stage::kHS) b.hs_shader = id;
        if (s == Stage::kDS) b.ds_shader = id;
        if (s == Stage::kGS) b.gs_shader = id;
        if (s == Stage::kPS) b.ps_shader = id;
        if (s == Stage::kCS) b.cs_shader = id;
        break;
      }
    }
    return b;
  }

  double opcode_delta(Stage s, const std::string& op, std::uint64_t iterations, std::uint32_t reps) {
    BatchRecord setup = stage_batch(s);
    BatchRecord b = setup;
    std::string id = bench_id(s) + "_op_" + op + "_" + std::to_string(iterations);
    if (!shaders_.contains(id)) {
      std::map<std::string, std::uint64_t> h{{"mov", 1}};
      h[op] += iterations;
      add_program(id, std::move(h));
    }
    if (s == Stage::kVS) b.vs_shader = id;
    if (s == Stage::kHS) b.hs_shader = id;
    if (s == Stage::kDS) b.ds_shader = id;
    if (s == Stage::kGS) b.gs_shader = id;
    if (s == Stage::kPS) b.ps_shader = id;
    if (s == Stage::kCS) b.cs_shader = id;
    std::uint32_t saved = cfg_.repetitions;
    cfg_.repetitions = reps;
    double d = measure(frame_of(b)) - measure(frame_of(setup));
    cfg_.repetitions = saved;
    return d;
  }

  RawSweep record_sweep(Stage s) {
    RawSweep raw;
    raw.stage = s;
    raw.setup = swept_batch(s, 0);
    Measurement setup = measure_se(frame_of(raw.setup));
    raw.setup_ms = setup.ms;
    raw.setup_se = setup.se;
    double amount = cfg_.min_load.at(s);
    double last = 0.0;
    for (std::uint32_t step = 0; step < cfg_.max_steps; ++step) {
      double a = std::max(std::ceil(amount), last + 1.0);
      last = a;
      BatchRecord b = swept_batch(s, a);
      Measurement m = measure_se(frame_of(b));
      raw.samples.push_back({b, m.ms, m.se});
      if (m.ms > cfg_.cap_ms) return raw;
      amount *= cfg_.factor;
    }
    throw InvariantError("sweep of stage " + std::string(stage_name(s)) + " never exceeded the " +
                         std::to_string(cfg_.cap_ms) + " ms cap within " + std::to_string(cfg_.max_steps) +
                         " steps");
  }

  // Loads in model units, using the opcode costs measured so far.
  StageLoadVector model_loads(const BatchRecord& b) const {
    return stage_loads(b, shaders_, model_.opcodes);
  }

  double known_time(Stage s, double load) const {
    const auto& f = model_.functions[index_of(s)];
    return f ? (*f)(load) : 0.0;
  }

  // Turns raw measurements into (load, marginal time) pairs: the swept
  // stage's load relative to the setup batch, and omega times the measured
  // difference minus what already-known stages account for.
  SweepResult finalize(const RawSweep& raw, const std::set<Stage>& unknown_ok) const {
    const double omega = static_cast<double>(profile_.omega);
    StageLoadVector l0 = model_loads(raw.setup);
    SweepResult out;
    out.stage = raw.stage;
    for (const RawSample& r : raw.samples) {
      StageLoadVector l = model_loads(r.batch);
      double ms = omega * (r.time_ms - raw.setup_ms);
      for (Stage s : kAllStages) {
        if (s == raw.stage) continue;
        bool changed = l[s] != l0[s] || (s == Stage::kHS && l.pcf != l0.pcf);
        if (!changed) continue;
        if (!model_.functions[index_of(s)]) {
          if (unknown_ok.contains(s)) continue;
          throw InvariantError("sweep of " + std::string(stage_name(raw.stage)) + " changes the load of unmeasured stage " +
                               std::string(stage_name(s)));
        }
        ms -= known_time(s, l[s]) - known_time(s, l0[s]);
        if (s == Stage::kHS) ms -= known_time(s, l.pcf) - known_time(s, l0.pcf);
      }
      double noise = omega * std::sqrt(r.se * r.se + raw.setup_se * raw.setup_se);
      out.samples.push_back({l[raw.stage] - l0[raw.stage], r.time_ms, ms, ms > kSignificance * noise});
    }
    return out;
  }

  // Samples lost in the noise are left out; the curve then runs straight
  // from the origin to the first significant sample.
  static PerfFunction to_function(const SweepResult& r) {
    std::vector<PerfPoint> pts;
    for (const SweepSample& s : r.samples) {
      if (s.significant) pts.push_back({s.load, s.marginal_ms});
    }
    if (pts.size() < 2) {
      pts.clear();
      for (const SweepSample& s : r.samples) pts.push_back({s.load, s.marginal_ms});
    }
    return build_perf_function(std::move(pts), 0.0);
  }

  static constexpr double kSignificance = 3.0;

  GpuProfile profile_;
  BenchConfig cfg_;
  std::mt19937_64 rng_;
  ShaderLibrary shaders_;
  PerfModel model_;
};

inline double measure_baseline(const GpuProfile& profile, const BenchConfig& cfg = {}) {
  return BenchRunner(profile, cfg).measure_baseline();
}

inline double bench_opcode(Stage s, const std::string& op, std::uint64_t iterations, const GpuProfile& profile,
                           const BenchConfig& cfg = {}) {
  return BenchRunner(profile, cfg).bench_opcode(s, op, iterations);
}

// Sweeps one stage after measuring whatever it depends on.
inline SweepResult sweep_stage(Stage s, const GpuProfile& profile, const BenchConfig& cfg = {}) {
  BenchRunner r(profile, cfg);
  r.measure_baseline();
  for (Stage p : {Stage::kVS, Stage::kHS, Stage::kDS, Stage::kGS, Stage::kPS, Stage::kCS}) {
    if (profile.has(p)) r.bench_opcode_table(p);
  }
  if (s == Stage::kRas || s == Stage::kOM) {
    // Fragment sweeps also raise the pass-through pixel shader's load.
    r.sweep_stage(Stage::kPS);
    auto [ras, om] = r.sweep_ras_om();
    return s == Stage::kRas ? ras : om;
  }
  return r.sweep_stage(s);
}

inline PerfModel run_suite(const GpuProfile& profile, const BenchConfig& cfg = {},
                           std::vector<SweepResult>* sweeps = nullptr) {
  return BenchRunner(profile, cfg).run_suite(sweeps);
}

}  // namespace gamorra
