#pragma once

// Shared fixtures for the unit tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gamorra/gamorra.hpp"

namespace gamorra::testing {

inline std::string random_id(std::mt19937_64& rng, const std::string& prefix) {
  return prefix + std::to_string(rng() % 5);
}

// A random valid batch; every optional stage is toggled independently.
inline BatchRecord random_batch(std::mt19937_64& rng, bool all_stages = false) {
  std::uniform_int_distribution<std::uint64_t> count(0, 100000);
  std::bernoulli_distribution coin(0.5);
  BatchRecord b;
  b.ia_bytes = count(rng);
  b.vertex_count = count(rng);
  b.attr_count = rng() % 16;
  if (all_stages || coin(rng)) b.vs_shader = random_id(rng, "vs");
  if (all_stages || coin(rng)) {
    b.hs_shader = random_id(rng, "hs");
    b.pcf_shader = random_id(rng, "pcf");
    b.ds_shader = random_id(rng, "ds");
    b.patch_count = rng() % 6;
    for (std::uint64_t p = 0; p < b.patch_count; ++p) b.tess_points_per_patch.push_back(rng() % 64);
    b.ds_vertex_count = count(rng);
  }
  if (all_stages || coin(rng)) {
    b.gs_shader = random_id(rng, "gs");
    b.gs_vertex_count = count(rng);
  }
  if (all_stages || coin(rng)) {
    b.fragment_count = count(rng) + 1;
    b.rt_width = 1 + rng() % 2048;
    b.rt_height = 1 + rng() % 2048;
    b.ps_shader = random_id(rng, "ps");
  }
  if (all_stages || coin(rng)) {
    b.cs_shader = random_id(rng, "cs");
    b.cs_input_count = count(rng);
  }
  return b;
}

inline std::string random_il(std::mt19937_64& rng, std::size_t lines) {
  static const char* ops[] = {"add", "mul", "mad", "mov", "dp4", "rsq", "loop", "endloop"};
  std::string text = "; generated\ndcl_temps 2\n";
  for (std::size_t i = 0; i < lines; ++i) text += std::string(ops[rng() % 8]) + " r0, r1, r2\n";
  return text;
}

// Random valid sequence with a shader store covering every referenced id.
inline FrameSequence random_sequence(std::uint64_t seed, std::size_t frames, bool all_stages = false) {
  std::mt19937_64 rng(seed);
  FrameSequence seq;
  std::uint64_t index = rng() % 10;
  for (std::size_t f = 0; f < frames; ++f) {
    FrameRecord fr;
    fr.frame_index = index;
    index += 1 + rng() % 3;
    std::size_t n = rng() % 6;
    for (std::size_t b = 0; b < n; ++b) fr.batches.push_back(random_batch(rng, all_stages));
    seq.frames.push_back(std::move(fr));
  }
  for (const FrameRecord& f : seq.frames) {
    for (const BatchRecord& b : f.batches) {
      for (const auto* id : {&b.vs_shader, &b.hs_shader, &b.pcf_shader, &b.ds_shader, &b.gs_shader, &b.ps_shader,
                             &b.cs_shader}) {
        if (*id && !seq.shader_store.contains(**id)) seq.shader_store[**id] = random_il(rng, 1 + rng() % 12);
      }
    }
  }
  return seq;
}

inline Actuals to_actuals(const SimulatedRun& run) {
  Actuals a;
  for (const FrameRecord& f : run.sequence.frames) a.frame.push_back(f.frame_index);
  a.actual_ms = run.actual_ms;
  a.freq_mhz = run.freq_mhz;
  return a;
}

}  // namespace gamorra::testing
