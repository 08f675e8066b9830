#pragma once

// Per-stage loads of a batch and the explanatory vector fed to the
// regression: w_0 = 1 and w_n = Perf_n(L_n) / omega for each stage.

#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gamorra/error.hpp"
#include "gamorra/il.hpp"
#include "gamorra/perf_model.hpp"
#include "gamorra/stage.hpp"
#include "gamorra/trace.hpp"

namespace gamorra {

// Resolved shader programs keyed by shader id.
using ShaderLibrary = std::map<std::string, ShaderProgram>;

inline ShaderLibrary parse_shader_store(const ShaderStore& store,
                                        std::vector<std::string>* warnings = nullptr) {
  ShaderLibrary lib;
  for (const auto& [id, text] : store) {
    try {
      lib.emplace(id, parse_program(text, id, nullptr, warnings));
    } catch (const ParseError& e) {
      throw ParseError(e.line(), "shader " + id + ": " + e.what());
    }
  }
  return lib;
}

struct StageLoadVector {
  std::array<double, kStageCount> load{};  // indexed by Stage
  double pcf = 0.0;                        // patch constant function load

  double operator[](Stage s) const noexcept { return load[index_of(s)]; }
  double& operator[](Stage s) noexcept { return load[index_of(s)]; }
};

// Model dimension: intercept + 9 graphics stages, plus CS when enabled.
struct ModelLayout {
  bool with_cs = false;

  std::size_t dimension() const noexcept { return with_cs ? 11 : 10; }

  bool operator==(const ModelLayout&) const = default;
};

using ExplanatoryVector = std::vector<double>;

inline ModelLayout layout_for(const FrameSequence& seq) {
  for (const FrameRecord& f : seq.frames) {
    for (const BatchRecord& b : f.batches) {
      if (b.cs_shader) return ModelLayout{true};
    }
  }
  return ModelLayout{false};
}

namespace detail {

inline const ShaderProgram& resolve(const ShaderLibrary& shaders, const std::string& id) {
  auto it = shaders.find(id);
  if (it == shaders.end()) throw MissingDataError("unresolved shader id '" + id + "'");
  return it->second;
}

}  // namespace detail

// Complexity lookup used by stage_loads; the default recomputes C from the
// histogram, FrameFeaturizer below caches it per (stage, shader).
struct DirectComplexity {
  const ShaderLibrary& shaders;
  const std::array<OpcodeCostTable, kStageCount>& costs;

  double operator()(Stage table, const std::string& id) const {
    return complexity(detail::resolve(shaders, id), costs[index_of(table)]);
  }
};

template <typename ComplexityFn>
StageLoadVector stage_loads_with(const BatchRecord& b, ComplexityFn&& c) {
  StageLoadVector l;
  auto n = [](std::uint64_t v) { return static_cast<double>(v); };
  l[Stage::kIA] = n(b.ia_bytes);
  if (b.vs_shader) l[Stage::kVS] = c(Stage::kVS, *b.vs_shader) * n(b.vertex_count);
  if (b.hs_shader) {
    l[Stage::kHS] = c(Stage::kHS, *b.hs_shader) * n(b.vertex_count);
    double points = 0.0;
    for (std::uint64_t p : b.tess_points_per_patch) points += n(p);
    l[Stage::kTess] = points;
  }
  if (b.pcf_shader) l.pcf = c(Stage::kHS, *b.pcf_shader) * n(b.patch_count);
  if (b.ds_shader) l[Stage::kDS] = c(Stage::kDS, *b.ds_shader) * n(b.ds_vertex_count);
  if (b.gs_shader) l[Stage::kGS] = c(Stage::kGS, *b.gs_shader) * n(b.gs_vertex_count);
  l[Stage::kRas] = n(b.fragment_count);
  if (b.ps_shader) l[Stage::kPS] = c(Stage::kPS, *b.ps_shader) * n(b.fragment_count);
  l[Stage::kOM] = n(b.rt_width) * n(b.rt_height) * n(b.fragment_count);
  if (b.cs_shader) l[Stage::kCS] = c(Stage::kCS, *b.cs_shader) * n(b.cs_input_count);
  return l;
}

// L_IA = bytes, L_prog = C * invocations, L_Tess = sum of generated points,
// L_Ras = fragments, L_OM = width * height * fragments. Stages without a
// shader (or, for tessellation, without a hull shader) have zero load.
inline StageLoadVector stage_loads(const BatchRecord& batch, const ShaderLibrary& shaders,
                                   const std::array<OpcodeCostTable, kStageCount>& costs) {
  return stage_loads_with(batch, DirectComplexity{shaders, costs});
}

struct ExplanatoryOptions {
  bool extrapolate = true;
};

inline ExplanatoryVector explanatory_vector(const StageLoadVector& loads, const PerfModel& perf,
                                            ModelLayout layout = {},
                                            ExplanatoryOptions opts = {}) {
  if (perf.omega < 1) throw InvariantError("omega must be >= 1");
  const double omega = static_cast<double>(perf.omega);
  ExplanatoryVector w(layout.dimension(), 0.0);
  w[0] = 1.0;
  auto eval = [&](Stage s, double load) {
    if (!(load > 0.0)) return 0.0;
    const PerfFunction& fn = perf.function(s);
    if (!opts.extrapolate && load > fn.max_load()) {
      throw InvariantError("load " + std::to_string(load) + " exceeds measured domain of stage " +
                           std::string(stage_name(s)));
    }
    return fn(load);
  };
  for (std::size_t i = 0; i < kGraphicsStageCount; ++i) {
    Stage s = kAllStages[i];
    double ms = eval(s, loads[s]);
    if (s == Stage::kHS) ms += eval(Stage::kHS, loads.pcf);
    w[i + 1] = ms / omega;
  }
  if (layout.with_cs) {
    w[10] = eval(Stage::kCS, loads[Stage::kCS]) / omega;
  } else if (loads[Stage::kCS] > 0.0) {
    throw InvariantError("batch dispatches compute work but the model layout has no CS regressor");
  }
  return w;
}

// Turns frames into explanatory vectors. Shader complexities are computed
// once per (stage table, shader) up front; the object is immutable after
// construction.
class FrameFeaturizer {
 public:
  FrameFeaturizer(const PerfModel& perf, ShaderLibrary shaders, ModelLayout layout)
      : perf_(perf), shaders_(std::move(shaders)), layout_(layout) {
    for (const auto& [id, prog] : shaders_) {
      for (Stage s : kAllStages) {
        if (!is_programmable(s)) continue;
        bool covered = true;
        for (const auto& [op, _] : prog.histogram) covered = covered && perf_.costs(s).cost.contains(op);
        if (covered) complexity_.emplace(std::make_pair(s, id), complexity(prog, perf_.costs(s)));
      }
    }
  }

  const ModelLayout& layout() const noexcept { return layout_; }
  const PerfModel& perf() const noexcept { return perf_; }
  const ShaderLibrary& shaders() const noexcept { return shaders_; }

  StageLoadVector loads(const BatchRecord& b) const {
    return stage_loads_with(b, [this](Stage table, const std::string& id) {
      auto it = complexity_.find(std::make_pair(table, id));
      if (it != complexity_.end()) return it->second;
      // Not precomputed: either unresolved or missing a cost; this throws.
      return complexity(detail::resolve(shaders_, id), perf_.costs(table));
    });
  }

  ExplanatoryVector batch_vector(const BatchRecord& b) const {
    return explanatory_vector(loads(b), perf_, layout_);
  }

  std::vector<ExplanatoryVector> frame_vectors(const FrameRecord& f) const {
    std::vector<ExplanatoryVector> out;
    out.reserve(f.batches.size());
    for (const BatchRecord& b : f.batches) out.push_back(batch_vector(b));
    return out;
  }

 private:
  PerfModel perf_;
  ShaderLibrary shaders_;
  ModelLayout layout_;
  std::map<std::pair<Stage, std::string>, double> complexity_;
};

}  // namespace gamorra
