#pragma once

// Synthetic GPU used as ground truth. Hidden per-stage cost curves and true
// opcode costs define the frame time; noise, clock and drift perturb it.
// Also generates game-like trace scenarios with simulated frame times.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gamorra/error.hpp"
#include "gamorra/il.hpp"
#include "gamorra/stage.hpp"
#include "gamorra/trace.hpp"
#include "gamorra/workload.hpp"

namespace gamorra {

// Opcodes the simulator knows, with their cost relative to `add`.
struct OpcodeInfo {
  const char* name;
  double relative_cost;
  bool pixel_only;
};

inline constexpr std::array<OpcodeInfo, 24> kOpcodeVocabulary = {{
    {"mov", 0.5, false},     {"add", 1.0, false},      {"mul", 1.0, false},    {"mad", 1.25, false},
    {"dp3", 1.5, false},     {"dp4", 2.0, false},      {"min", 1.0, false},    {"max", 1.0, false},
    {"rsq", 4.0, false},     {"sqrt", 4.0, false},     {"exp", 4.0, false},    {"log", 4.0, false},
    {"div", 6.0, false},     {"frc", 1.0, false},      {"loop", 2.0, false},   {"endloop", 2.0, false},
    {"breakc_nz", 1.5, false}, {"if_nz", 1.5, false},  {"endif", 1.0, false},  {"ret", 0.5, false},
    {"sample", 8.0, true},   {"sample_l", 10.0, true}, {"discard_nz", 2.0, true}, {"gather4", 12.0, true},
}};

struct StageCurve {
  enum class Kind { kLinear, kKnee, kConvex };
  Kind kind = Kind::kLinear;
  double slope = 0.0;      // ms per unit load
  double knee = 0.0;       // kKnee: load where the slope changes
  double slope2 = 0.0;     // kKnee: slope past the knee
  double convexity = 0.0;  // kConvex: ms = slope * x * (1 + convexity * x)

  double operator()(double x) const noexcept {
    if (!(x > 0.0)) return 0.0;
    switch (kind) {
      case Kind::kKnee:
        return x <= knee ? slope * x : slope * knee + slope2 * (x - knee);
      case Kind::kConvex:
        return slope * x * (1.0 + convexity * x);
      default:
        return slope * x;
    }
  }

  bool operator==(const StageCurve&) const = default;
};

struct GpuProfile {
  std::string name = "profile";
  std::uint32_t omega = 1;
  double overhead_ms = 0.0;  // per batch; an empty frame costs one overhead
  double noise_sigma = 0.0;  // multiplicative, fraction of frame time
  double freq_ref_mhz = 1000.0;
  double freq_sensitivity = 1.0;
  double early_z_cull = 0.0;   // fraction of PS/OM work removed by early-z
  double ptc_hit_ratio = 0.0;  // post-transform cache hits saving VS invocations
  std::array<std::optional<StageCurve>, kStageCount> curves;
  std::array<std::map<std::string, double>, kStageCount> opcode_ms;  // true cost per execution

  bool has(Stage s) const noexcept { return curves[index_of(s)].has_value(); }

  void validate() const {
    if (omega < 1) throw InvariantError("profile omega must be >= 1");
    if (!(overhead_ms > 0.0)) throw InvariantError("profile overhead_ms must be > 0");
    if (!(noise_sigma >= 0.0)) throw InvariantError("profile noise_sigma must be >= 0");
    if (!(freq_ref_mhz > 0.0)) throw InvariantError("profile freq_ref_mhz must be > 0");
    if (!(early_z_cull >= 0.0 && early_z_cull < 1.0)) throw InvariantError("early_z_cull must be in [0, 1)");
    if (!(ptc_hit_ratio >= 0.0 && ptc_hit_ratio < 1.0)) throw InvariantError("ptc_hit_ratio must be in [0, 1)");
    for (std::size_t i = 0; i < kGraphicsStageCount; ++i) {
      if (!curves[i]) throw InvariantError("profile missing curve for stage " + std::string(stage_name(kAllStages[i])));
    }
    for (Stage s : kAllStages) {
      const auto& c = curves[index_of(s)];
      if (c) {
        bool ok = c->slope > 0.0 && c->convexity >= 0.0 &&
                  (c->kind != StageCurve::Kind::kKnee || (c->knee > 0.0 && c->slope2 > 0.0));
        if (!ok) throw InvariantError("curve for stage " + std::string(stage_name(s)) + " is not increasing");
      }
      if (is_programmable(s) && c && opcode_ms[index_of(s)].empty()) {
        throw InvariantError("programmable stage " + std::string(stage_name(s)) + " has no opcode costs");
      }
      for (const auto& [op, ms] : opcode_ms[index_of(s)]) {
        if (!(ms > 0.0)) throw InvariantError("opcode cost must be > 0: " + op);
      }
    }
  }
};

// Builds a stage's true opcode table from the cost of `add` and the
// vocabulary's relative costs.
inline std::map<std::string, double> opcode_table(Stage s, double add_ms) {
  std::map<std::string, double> t;
  for (const OpcodeInfo& op : kOpcodeVocabulary) {
    if (op.pixel_only && s != Stage::kPS) continue;
    t[op.name] = add_ms * op.relative_cost;
  }
  return t;
}

inline StageCurve linear_curve(double slope) { return {StageCurve::Kind::kLinear, slope, 0, 0, 0}; }

// The profile the benchmark anchors are stated against: one core, an
// empty-pipeline time of 6.966 ms, and curves sized so that the
// documented loads land near the 100 ms cap.
inline GpuProfile reference_profile() {
  GpuProfile p;
  p.name = "reference";
  p.omega = 1;
  p.overhead_ms = 6.966;
  p.curves[index_of(Stage::kIA)] = linear_curve(6.3e-8);
  p.curves[index_of(Stage::kVS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kHS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kTess)] = linear_curve(1.43e-5);
  p.curves[index_of(Stage::kDS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kGS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kRas)] = StageCurve{StageCurve::Kind::kKnee, 2e-6, 2e7, 6.2e-6, 0};
  p.curves[index_of(Stage::kPS)] = StageCurve{StageCurve::Kind::kConvex, 1.0, 0, 0, 1e-3};
  p.curves[index_of(Stage::kOM)] = linear_curve(4e-12);
  p.curves[index_of(Stage::kCS)] = linear_curve(1.0);
  p.opcode_ms[index_of(Stage::kVS)] = opcode_table(Stage::kVS, 7.15e-7);
  p.opcode_ms[index_of(Stage::kHS)] = opcode_table(Stage::kHS, 8e-7);
  p.opcode_ms[index_of(Stage::kDS)] = opcode_table(Stage::kDS, 8e-7);
  p.opcode_ms[index_of(Stage::kGS)] = opcode_table(Stage::kGS, 1.5e-6);
  p.opcode_ms[index_of(Stage::kPS)] = opcode_table(Stage::kPS, 1e-6);
  p.opcode_ms[index_of(Stage::kCS)] = opcode_table(Stage::kCS, 7e-7);
  return p;
}

// Reference profile with every curve made linear: the setting in which the
// simulator lies exactly inside the regression's model family.
inline GpuProfile linear_profile() {
  GpuProfile p = reference_profile();
  p.name = "linear";
  p.curves[index_of(Stage::kRas)] = linear_curve(2e-6);
  p.curves[index_of(Stage::kPS)] = linear_curve(1.0);
  return p;
}

// A mid-range game GPU: small per-batch overhead, eight cores, mild
// nonlinearity, frame-level noise and early-z.
inline GpuProfile game_profile() {
  GpuProfile p;
  p.name = "game";
  p.omega = 8;
  p.overhead_ms = 0.15;
  p.noise_sigma = 0.08;
  p.freq_ref_mhz = 1200.0;
  p.freq_sensitivity = 0.8;
  p.early_z_cull = 0.2;
  p.curves[index_of(Stage::kIA)] = linear_curve(5e-6);
  p.curves[index_of(Stage::kVS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kHS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kTess)] = linear_curve(4e-4);
  p.curves[index_of(Stage::kDS)] = linear_curve(1.0);
  p.curves[index_of(Stage::kGS)] = StageCurve{StageCurve::Kind::kConvex, 1.0, 0, 0, 0.01};
  p.curves[index_of(Stage::kRas)] = StageCurve{StageCurve::Kind::kKnee, 2.4e-5, 6e5, 4e-5, 0};
  p.curves[index_of(Stage::kPS)] = StageCurve{StageCurve::Kind::kConvex, 1.0, 0, 0, 0.004};
  p.curves[index_of(Stage::kOM)] = linear_curve(1e-11);
  p.curves[index_of(Stage::kCS)] = linear_curve(1.0);
  p.opcode_ms[index_of(Stage::kVS)] = opcode_table(Stage::kVS, 2e-6);
  p.opcode_ms[index_of(Stage::kHS)] = opcode_table(Stage::kHS, 4e-6);
  p.opcode_ms[index_of(Stage::kDS)] = opcode_table(Stage::kDS, 3e-6);
  p.opcode_ms[index_of(Stage::kGS)] = opcode_table(Stage::kGS, 6e-6);
  p.opcode_ms[index_of(Stage::kPS)] = opcode_table(Stage::kPS, 2.5e-7);
  p.opcode_ms[index_of(Stage::kCS)] = opcode_table(Stage::kCS, 1e-5);
  return p;
}

namespace detail {

inline const char* curve_kind_name(StageCurve::Kind k) {
  switch (k) {
    case StageCurve::Kind::kKnee:
      return "knee";
    case StageCurve::Kind::kConvex:
      return "convex";
    default:
      return "linear";
  }
}

inline std::optional<std::size_t> opcode_index(const std::string& name) {
  for (std::size_t i = 0; i < kOpcodeVocabulary.size(); ++i) {
    if (name == kOpcodeVocabulary[i].name) return i;
  }
  return std::nullopt;
}

}  // namespace detail

// Stage entries: {"curve": "linear"|"knee"|"convex", "slope", "knee",
// "slope2", "convexity", "op_add_ms", "opcodes": {name: ms}}. Opcodes not
// listed explicitly are derived from op_add_ms.
inline GpuProfile profile_from_json(const nlohmann::json& j) {
  try {
    GpuProfile p;
    p.name = j.value("name", p.name);
    int omega = j.value("omega", 1);
    if (omega < 1) throw InvariantError("profile omega must be >= 1");
    p.omega = static_cast<std::uint32_t>(omega);
    p.overhead_ms = j.at("overhead_ms").get<double>();
    p.noise_sigma = j.value("noise_sigma", 0.0);
    p.freq_ref_mhz = j.value("freq_ref_mhz", p.freq_ref_mhz);
    p.freq_sensitivity = j.value("freq_sensitivity", p.freq_sensitivity);
    p.early_z_cull = j.value("early_z_cull", 0.0);
    p.ptc_hit_ratio = j.value("ptc_hit_ratio", 0.0);
    for (const auto& [name, sj] : j.at("stages").items()) {
      auto s = stage_from_name(name);
      if (!s) throw InvariantError("unknown stage '" + name + "' in profile");
      StageCurve c;
      std::string kind = sj.value("curve", std::string("linear"));
      if (kind == "linear") {
        c.kind = StageCurve::Kind::kLinear;
      } else if (kind == "knee") {
        c.kind = StageCurve::Kind::kKnee;
      } else if (kind == "convex") {
        c.kind = StageCurve::Kind::kConvex;
      } else {
        throw InvariantError("unknown curve kind '" + kind + "'");
      }
      c.slope = sj.at("slope").get<double>();
      c.knee = sj.value("knee", 0.0);
      c.slope2 = sj.value("slope2", 0.0);
      c.convexity = sj.value("convexity", 0.0);
      p.curves[index_of(*s)] = c;
      if (is_programmable(*s)) {
        auto& table = p.opcode_ms[index_of(*s)];
        if (sj.contains("op_add_ms")) table = opcode_table(*s, sj["op_add_ms"].get<double>());
        if (sj.contains("opcodes")) {
          for (const auto& [op, ms] : sj["opcodes"].items()) table[op] = ms.get<double>();
        }
      } else if (sj.contains("op_add_ms") || sj.contains("opcodes")) {
        throw InvariantError("fixed-function stage '" + name + "' cannot have opcodes");
      }
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed profile: ") + e.what());
  }
}

inline nlohmann::json profile_to_json(const GpuProfile& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["omega"] = p.omega;
  j["overhead_ms"] = p.overhead_ms;
  j["noise_sigma"] = p.noise_sigma;
  j["freq_ref_mhz"] = p.freq_ref_mhz;
  j["freq_sensitivity"] = p.freq_sensitivity;
  j["early_z_cull"] = p.early_z_cull;
  j["ptc_hit_ratio"] = p.ptc_hit_ratio;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (Stage s : kAllStages) {
    const auto& c = p.curves[index_of(s)];
    if (!c) continue;
    nlohmann::ordered_json sj;
    sj["curve"] = detail::curve_kind_name(c->kind);
    sj["slope"] = c->slope;
    if (c->kind == StageCurve::Kind::kKnee) {
      sj["knee"] = c->knee;
      sj["slope2"] = c->slope2;
    }
    if (c->kind == StageCurve::Kind::kConvex) sj["convexity"] = c->convexity;
    if (is_programmable(s)) sj["opcodes"] = p.opcode_ms[index_of(s)];
    stages[std::string(stage_name(s))] = sj;
  }
  j["stages"] = stages;
  return nlohmann::json::parse(j.dump());
}

inline GpuProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open profile: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("malformed profile " + path.string() + ": " + e.what());
  }
  return profile_from_json(j);
}

// Per-frame state the simulator does not read from the trace.
struct SimConditions {
  double freq_mhz = 0.0;  // 0 means the profile's reference frequency
  std::array<double, kStageCount> drift{1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  double overhead_drift = 1.0;
  bool early_z = true;
};

// Per-stage loads in the simulator's own units: programmable stages use the
// true opcode costs, early-z and the post-transform cache are applied.
inline StageLoadVector true_loads(const GpuProfile& p, const BatchRecord& b, const ShaderLibrary& shaders,
                                  bool early_z = true) {
  auto cost = [&](Stage table, const std::string& id) {
    auto it = shaders.find(id);
    if (it == shaders.end()) throw MissingDataError("unresolved shader id '" + id + "'");
    double c = 0.0;
    const auto& t = p.opcode_ms[index_of(table)];
    for (const auto& [op, n] : it->second.histogram) {
      auto ot = t.find(op);
      if (ot == t.end()) {
        throw MissingDataError("simulator has no cost for opcode '" + op + "' in stage " +
                               std::string(stage_name(table)));
      }
      c += ot->second * static_cast<double>(n);
    }
    return c;
  };
  StageLoadVector l = stage_loads_with(b, cost);
  l[Stage::kVS] *= 1.0 - p.ptc_hit_ratio;
  if (early_z) {
    l[Stage::kPS] *= 1.0 - p.early_z_cull;
    l[Stage::kOM] *= 1.0 - p.early_z_cull;
  }
  return l;
}

// Noise-free time of a frame at the reference frequency.
inline double frame_cost(const GpuProfile& p, const FrameRecord& frame, const ShaderLibrary& shaders,
                         const SimConditions& cond = {}) {
  const double omega = static_cast<double>(p.omega);
  const double overhead = p.overhead_ms * cond.overhead_drift;
  if (frame.batches.empty()) return overhead;
  double total = 0.0;
  for (const BatchRecord& b : frame.batches) {
    StageLoadVector l = true_loads(p, b, shaders, cond.early_z);
    double t = 0.0;
    for (Stage s : kAllStages) {
      double load = l[s];
      double pcf = s == Stage::kHS ? l.pcf : 0.0;
      if (!(load > 0.0) && !(pcf > 0.0)) continue;
      const auto& c = p.curves[index_of(s)];
      if (!c) throw InvariantError("profile has no curve for active stage " + std::string(stage_name(s)));
      t += ((*c)(load) + (*c)(pcf)) * cond.drift[index_of(s)];
    }
    total += overhead + t / omega;
  }
  return total;
}

// frametime = (overhead per batch + sum of stage curves * drift / omega)
// scaled by the clock and by multiplicative Gaussian noise truncated at
// four standard deviations.
template <typename Rng>
double simulate_frame(const GpuProfile& p, const FrameRecord& frame, const ShaderLibrary& shaders,
                      const SimConditions& cond, Rng& rng) {
  double t = frame_cost(p, frame, shaders, cond);
  double f = cond.freq_mhz > 0.0 ? cond.freq_mhz : p.freq_ref_mhz;
  if (f != p.freq_ref_mhz) t *= std::pow(p.freq_ref_mhz / f, p.freq_sensitivity);
  if (p.noise_sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double z = std::clamp(normal(rng), -4.0, 4.0);
    t *= 1.0 + p.noise_sigma * z;
  }
  return t;
}

struct DriftEvent {
  std::uint64_t frame = 0;
  std::vector<std::string> stages;  // stage names, or "all" (includes overhead)
  double multiplier = 1.0;
};

struct FrequencyStep {
  std::uint64_t frame = 0;
  double mhz = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t frames = 100;
  std::uint64_t seed = 0;
  std::uint32_t templates = 12;         // batch archetypes per scene
  double presence = 0.85;               // chance a template draws in a frame
  std::uint64_t scene_length = 0;       // frames per scene, 0 = one scene
  double walk_sigma = 0.03;             // per-frame log-space step
  double walk_clip = 1.2;               // bound on the log-space walk
  double jitter_sigma = 0.05;           // per-batch, per-frame log-normal jitter
  double load_scale = 1.0;              // multiplies every base load
  std::vector<std::string> stages = {"ia", "vs", "hs", "tess", "ds", "gs", "ras", "ps", "om"};
  double tess_share = 0.3;              // fraction of templates that tessellate
  double gs_share = 0.3;                // fraction of templates with a geometry shader
  double compute_share = 0.15;          // fraction of templates that are compute dispatches
  std::uint32_t shader_pool = 6;        // programs generated per stage
  std::uint32_t min_shader_ops = 8;
  std::uint32_t max_shader_ops = 80;
  std::vector<DriftEvent> drift;
  std::vector<FrequencyStep> frequency;

  bool active(Stage s) const {
    return std::find(stages.begin(), stages.end(), stage_name(s)) != stages.end();
  }

  void validate() const {
    if (frames < 1) throw InvariantError("scenario frames must be >= 1");
    if (templates < 1) throw InvariantError("scenario templates must be >= 1");
    if (!(presence > 0.0 && presence <= 1.0)) throw InvariantError("presence must be in (0, 1]");
    if (!(walk_sigma >= 0.0 && jitter_sigma >= 0.0 && walk_clip >= 0.0)) {
      throw InvariantError("walk parameters must be >= 0");
    }
    if (!(load_scale > 0.0)) throw InvariantError("load_scale must be > 0");
    if (shader_pool < 1 || min_shader_ops < 1 || max_shader_ops < min_shader_ops) {
      throw InvariantError("invalid shader generation parameters");
    }
    for (const std::string& s : stages) {
      if (!stage_from_name(s)) throw InvariantError("unknown stage '" + s + "' in scenario mask");
    }
    bool tess = active(Stage::kHS) || active(Stage::kTess) || active(Stage::kDS);
    if (tess && !(active(Stage::kHS) && active(Stage::kTess) && active(Stage::kDS))) {
      throw InvariantError("hs, tess and ds must be masked together");
    }
    for (const DriftEvent& d : drift) {
      if (!(d.multiplier > 0.0)) throw InvariantError("drift multiplier must be > 0");
      for (const std::string& s : d.stages) {
        if (s != "all" && !stage_from_name(s)) throw InvariantError("unknown stage '" + s + "' in drift event");
      }
    }
    for (const FrequencyStep& f : frequency) {
      if (!(f.mhz > 0.0)) throw InvariantError("frequency must be > 0");
    }
  }
};

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.frames = j.value("frames", c.frames);
    c.seed = j.value("seed", c.seed);
    c.templates = j.value("templates", c.templates);
    c.presence = j.value("presence", c.presence);
    c.scene_length = j.value("scene_length", c.scene_length);
    c.walk_sigma = j.value("walk_sigma", c.walk_sigma);
    c.walk_clip = j.value("walk_clip", c.walk_clip);
    c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
    c.load_scale = j.value("load_scale", c.load_scale);
    c.stages = j.value("stages", c.stages);
    c.tess_share = j.value("tess_share", c.tess_share);
    c.gs_share = j.value("gs_share", c.gs_share);
    c.compute_share = j.value("compute_share", c.compute_share);
    c.shader_pool = j.value("shader_pool", c.shader_pool);
    c.min_shader_ops = j.value("min_shader_ops", c.min_shader_ops);
    c.max_shader_ops = j.value("max_shader_ops", c.max_shader_ops);
    if (j.contains("drift")) {
      for (const auto& d : j["drift"]) {
        c.drift.push_back({d.at("frame").get<std::uint64_t>(), d.at("stages").get<std::vector<std::string>>(),
                           d.at("multiplier").get<double>()});
      }
    }
    if (j.contains("frequency")) {
      for (const auto& f : j["frequency"]) {
        c.frequency.push_back({f.at("frame").get<std::uint64_t>(), f.at("mhz").get<double>()});
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed scenario: ") + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open scenario: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("malformed scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

struct SimulatedRun {
  FrameSequence sequence;
  std::vector<double> actual_ms;
  std::vector<double> freq_mhz;
};

namespace detail {

// Random IL program for one stage. Straight-line arithmetic after a header,
// sometimes with a loop whose body is counted once.
template <typename Rng>
std::string generate_il(Stage s, std::uint32_t min_ops, std::uint32_t max_ops, Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> len(min_ops, max_ops);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<const char*> alu = {"add", "mul", "mad", "dp3", "dp4", "min", "max",
                                  "rsq", "sqrt", "exp", "log", "div", "frc", "mov"};
  std::vector<const char*> tex = {"sample", "sample_l", "gather4"};
  std::ostringstream os;
  os << stage_name(s) << "_5_0\n";
  os << "; generated " << stage_name(s) << " program\n";
  os << "dcl_globalFlags refactoringAllowed\n";
  os << "dcl_constantbuffer cb0[8], immediateIndexed\n";
  os << "dcl_temps 4\n";
  std::uint32_t n = len(rng);
  bool looped = n > 12 && u(rng) < 0.4;
  std::uint32_t loop_at = looped ? n / 2 : n + 1;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (i == loop_at) {
      os << "loop\n";
      os << "  breakc_nz r3.x\n";
      for (int k = 0; k < 3; ++k) os << "  mad r2.xyzw, r0.xyzw, cb0[1].xyzw, r2.xyzw\n";
      os << "endloop\n";
    }
    const char* op = nullptr;
    if (s == Stage::kPS && u(rng) < 0.15) {
      op = tex[static_cast<std::size_t>(u(rng) * static_cast<double>(tex.size())) % tex.size()];
      os << op << " r0.xyzw, v1.xyxx, t0.xyzw, s0\n";
      continue;
    }
    op = alu[static_cast<std::size_t>(u(rng) * static_cast<double>(alu.size())) % alu.size()];
    os << op << " r" << (i % 4) << ".xyzw, r" << ((i + 1) % 4) << ".xyzw, cb0[" << (i % 8) << "].xyzw\n";
  }
  if (s == Stage::kPS && u(rng) < 0.2) os << "discard_nz r1.w\n";
  os << "ret\n";
  return os.str();
}

struct BatchTemplate {
  bool compute = false;
  bool tess = false;
  bool gs = false;
  double vertices = 0, stride = 0, fragments = 0, patches = 0, points_per_patch = 0;
  double gs_out = 0, cs_inputs = 0;
  std::uint64_t rt_width = 0, rt_height = 0;
  std::string vs, hs, pcf, ds, gs_id, ps, cs;
  std::array<double, kStageCount> walk{};  // log-space walk per stage
};

template <typename Rng>
double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace detail

// Generates a trace whose per-stage loads follow independent log-space
// random walks around per-template base loads, with new templates at every
// scene change, and simulates each frame's actual time. Drift events
// multiply the hidden stage curves from their frame onwards.
inline SimulatedRun generate_sequence(const GpuProfile& profile, const ScenarioConfig& cfg) {
  profile.validate();
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimulatedRun run;
  ShaderStore& store = run.sequence.shader_store;
  std::map<Stage, std::vector<std::string>> pool;
  for (Stage s : kAllStages) {
    bool needed = is_programmable(s) && (cfg.active(s) || (s == Stage::kVS) || (s == Stage::kPS && cfg.active(Stage::kRas)));
    if (s == Stage::kCS) needed = cfg.active(Stage::kCS);
    if (!needed) continue;
    for (std::uint32_t k = 0; k < cfg.shader_pool; ++k) {
      std::string id = std::string(stage_name(s)) + "_" + std::to_string(k);
      store[id] = detail::generate_il(s, cfg.min_shader_ops, cfg.max_shader_ops, rng);
      pool[s].push_back(id);
    }
    if (s == Stage::kHS) {
      for (std::uint32_t k = 0; k < cfg.shader_pool; ++k) {
        std::string id = "pcf_" + std::to_string(k);
        store[id] = detail::generate_il(Stage::kHS, cfg.min_shader_ops / 2 + 1, cfg.max_shader_ops / 4 + 1, rng);
        pool[Stage::kTess].push_back(id);  // patch constant functions
      }
    }
  }
  ShaderLibrary shaders = parse_shader_store(store);
  auto pick = [&](Stage s) {
    const auto& v = pool.at(s);
    return v[static_cast<std::size_t>(u(rng) * static_cast<double>(v.size())) % v.size()];
  };
  const std::array<std::pair<std::uint64_t, std::uint64_t>, 4> targets = {
      {{1920, 1080}, {960, 540}, {2048, 2048}, {1024, 1024}}};

  auto make_templates = [&]() {
    std::vector<detail::BatchTemplate> ts(cfg.templates);
    for (auto& t : ts) {
      t.compute = cfg.active(Stage::kCS) && u(rng) < cfg.compute_share;
      if (t.compute) {
        t.cs = pick(Stage::kCS);
        t.cs_inputs = detail::log_uniform(rng, 1e3, 6e4) * cfg.load_scale;
        continue;
      }
      t.vertices = detail::log_uniform(rng, 300, 3e4) * cfg.load_scale;
      t.stride = std::array<double, 5>{16, 24, 32, 48, 64}[static_cast<std::size_t>(u(rng) * 5) % 5];
      t.vs = pick(Stage::kVS);
      if (cfg.active(Stage::kRas)) {
        t.fragments = detail::log_uniform(rng, 2e3, 6e5) * cfg.load_scale;
        auto rt = targets[static_cast<std::size_t>(u(rng) * 4) % 4];
        t.rt_width = rt.first;
        t.rt_height = rt.second;
        if (cfg.active(Stage::kPS)) t.ps = pick(Stage::kPS);
      }
      t.tess = cfg.active(Stage::kHS) && u(rng) < cfg.tess_share;
      if (t.tess) {
        t.hs = pick(Stage::kHS);
        t.pcf = pick(Stage::kTess);
        t.ds = pick(Stage::kDS);
        t.patches = detail::log_uniform(rng, 50, 3000) * cfg.load_scale;
        t.points_per_patch = detail::log_uniform(rng, 4, 64);
      }
      t.gs = cfg.active(Stage::kGS) && u(rng) < cfg.gs_share;
      if (t.gs) {
        t.gs_id = pick(Stage::kGS);
        t.gs_out = detail::log_uniform(rng, 0.5, 3.0);
      }
    }
    return ts;
  };

  std::vector<detail::BatchTemplate> templates = make_templates();
  SimConditions cond;
  std::vector<DriftEvent> drift = cfg.drift;
  std::stable_sort(drift.begin(), drift.end(), [](const DriftEvent& a, const DriftEvent& b) { return a.frame < b.frame; });
  std::size_t next_drift = 0;

  auto factor = [&](const detail::BatchTemplate& t, Stage s) {
    double j = cfg.jitter_sigma > 0.0 ? std::exp(cfg.jitter_sigma * normal(rng)) : 1.0;
    return std::exp(t.walk[index_of(s)]) * j;
  };
  auto count = [](double v) { return static_cast<std::uint64_t>(std::max(1.0, std::round(v))); };

  run.sequence.frames.reserve(cfg.frames);
  for (std::uint64_t i = 0; i < cfg.frames; ++i) {
    if (cfg.scene_length > 0 && i > 0 && i % cfg.scene_length == 0) templates = make_templates();
    while (next_drift < drift.size() && drift[next_drift].frame <= i) {
      const DriftEvent& d = drift[next_drift++];
      for (const std::string& name : d.stages) {
        if (name == "all") {
          for (double& m : cond.drift) m *= d.multiplier;
          cond.overhead_drift *= d.multiplier;
        } else {
          cond.drift[index_of(*stage_from_name(name))] *= d.multiplier;
        }
      }
    }
    cond.freq_mhz = profile.freq_ref_mhz;
    for (const FrequencyStep& f : cfg.frequency) {
      if (f.frame <= i) cond.freq_mhz = f.mhz;
    }

    FrameRecord frame;
    frame.frame_index = i;
    for (auto& t : templates) {
      for (double& w : t.walk) {
        if (cfg.walk_sigma > 0.0) w = std::clamp(w + cfg.walk_sigma * normal(rng), -cfg.walk_clip, cfg.walk_clip);
      }
      if (cfg.presence < 1.0 && u(rng) >= cfg.presence) continue;
      BatchRecord b;
      if (t.compute) {
        b.cs_shader = t.cs;
        b.cs_input_count = count(t.cs_inputs * factor(t, Stage::kCS));
        frame.batches.push_back(std::move(b));
        continue;
      }
      double verts = t.vertices * factor(t, Stage::kVS);
      b.vertex_count = count(verts);
      b.attr_count = static_cast<std::uint64_t>(t.stride / 4);
      if (cfg.active(Stage::kIA)) {
        b.ia_bytes = count(static_cast<double>(b.vertex_count) * t.stride * factor(t, Stage::kIA));
      }
      b.vs_shader = t.vs;
      if (t.tess) {
        b.hs_shader = t.hs;
        b.pcf_shader = t.pcf;
        b.ds_shader = t.ds;
        std::uint64_t patches = count(t.patches * factor(t, Stage::kHS));
        b.patch_count = patches;
        double per_patch = t.points_per_patch * factor(t, Stage::kTess);
        b.tess_points_per_patch.assign(patches, count(per_patch));
        std::uint64_t points = 0;
        for (std::uint64_t p : b.tess_points_per_patch) points += p;
        b.ds_vertex_count = count(static_cast<double>(points) * factor(t, Stage::kDS) / 2.0);
      }
      if (t.gs) {
        b.gs_shader = t.gs_id;
        b.gs_vertex_count = count(verts * t.gs_out * factor(t, Stage::kGS));
      }
      if (cfg.active(Stage::kRas)) {
        b.fragment_count = count(t.fragments * factor(t, Stage::kRas));
        b.rt_width = t.rt_width;
        b.rt_height = t.rt_height;
        if (!t.ps.empty()) b.ps_shader = t.ps;
      }
      frame.batches.push_back(std::move(b));
    }
    run.actual_ms.push_back(simulate_frame(profile, frame, shaders, cond, rng));
    run.freq_mhz.push_back(cond.freq_mhz);
    run.sequence.frames.push_back(std::move(frame));
  }
  return run;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Actuals CSV: frame,actual_ms,freq_mhz.
inline void write_actuals(const std::filesystem::path& path, const std::vector<FrameRecord>& frames,
                          const std::vector<double>& actual_ms, const std::vector<double>& freq_mhz) {
  std::ofstream out(path);
  out << "frame,actual_ms,freq_mhz\n";
  for (std::size_t i = 0; i < actual_ms.size(); ++i) {
    out << frames[i].frame_index << ',' << format_double(actual_ms[i]) << ',' << format_double(freq_mhz[i]) << '\n';
  }
  if (!out) throw Error("cannot write actuals: " + path.string());
}

struct Actuals {
  std::vector<std::uint64_t> frame;
  std::vector<double> actual_ms;
  std::vector<double> freq_mhz;  // 0 when the file has no frequency column
};

inline Actuals read_actuals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open actuals: " + path.string());
  Actuals a;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.starts_with("frame")) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2 || cells.size() > 3) throw ParseError(line_no, "expected frame,actual_ms[,freq_mhz]");
    try {
      std::size_t used = 0;
      a.frame.push_back(std::stoull(cells[0], &used));
      double ms = std::stod(cells[1], &used);
      if (!(ms > 0.0) || !std::isfinite(ms)) throw ParseError(line_no, "actual_ms must be > 0");
      a.actual_ms.push_back(ms);
      a.freq_mhz.push_back(cells.size() == 3 ? std::stod(cells[2]) : 0.0);
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "malformed number in actuals");
    }
  }
  return a;
}

}  // namespace gamorra
