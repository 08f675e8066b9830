#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gamorra/sim.hpp"
#include "gamorra/trace.hpp"

namespace gamorra {
namespace {

ShaderLibrary one_shader(const std::string& id, const std::string& text) { return {{id, parse_program(text, id)}}; }

TEST(FrameCost, EmptyFrameCostsOneOverhead) {
  GpuProfile p = reference_profile();
  EXPECT_EQ(frame_cost(p, FrameRecord{}, {}), 6.966);
  std::mt19937_64 rng(1);
  EXPECT_EQ(simulate_frame(p, FrameRecord{}, {}, SimConditions{}, rng), 6.966);
}

TEST(FrameCost, ClosedFormSingleBatch) {
  GpuProfile p = linear_profile();
  p.omega = 2;
  ShaderLibrary lib = one_shader("v", "add r0\nmul r0\n");
  FrameRecord f;
  BatchRecord b;
  b.vs_shader = "v";
  b.vertex_count = 1000;
  b.ia_bytes = 4000;
  f.batches = {b};
  double c_vs = p.opcode_ms[index_of(Stage::kVS)].at("add") + p.opcode_ms[index_of(Stage::kVS)].at("mul");
  double expect = 6.966 + (6.3e-8 * 4000 + 1.0 * c_vs * 1000) / 2.0;
  EXPECT_NEAR(frame_cost(p, f, lib), expect, 1e-12);
  // Two identical batches pay two overheads.
  f.batches.push_back(b);
  EXPECT_NEAR(frame_cost(p, f, lib), 2 * expect, 1e-12);
}

TEST(FrameCost, DriftScalesStageTerms) {
  GpuProfile p = linear_profile();
  ShaderLibrary lib = one_shader("v", "add r0\n");
  FrameRecord f;
  BatchRecord b;
  b.vs_shader = "v";
  b.vertex_count = 1e6;
  f.batches = {b};
  double base = frame_cost(p, f, lib);
  SimConditions c;
  c.drift[index_of(Stage::kVS)] = 1.5;
  EXPECT_NEAR(frame_cost(p, f, lib, c) - p.overhead_ms, 1.5 * (base - p.overhead_ms), 1e-12);
  c.overhead_drift = 2.0;
  EXPECT_NEAR(frame_cost(p, f, lib, c), 2.0 * p.overhead_ms + 1.5 * (base - p.overhead_ms), 1e-12);
}

TEST(SimulateFrame, FrequencyScaling) {
  GpuProfile p = reference_profile();
  p.freq_sensitivity = 0.5;
  std::mt19937_64 rng(0);
  SimConditions c;
  c.freq_mhz = 250;
  EXPECT_NEAR(simulate_frame(p, FrameRecord{}, {}, c, rng), 6.966 * 2.0, 1e-12);
}

TEST(SimulateFrame, NoiseIsUnbiasedAndBounded) {
  GpuProfile p = reference_profile();
  p.noise_sigma = 0.1;
  std::mt19937_64 rng(3);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double t = simulate_frame(p, FrameRecord{}, {}, SimConditions{}, rng);
    EXPECT_GE(t, 6.966 * 0.6 - 1e-12);
    EXPECT_LE(t, 6.966 * 1.4 + 1e-12);
    sum += t;
  }
  EXPECT_NEAR(sum / n / 6.966, 1.0, 4 * 0.1 / std::sqrt(double(n)));
}

TEST(TrueLoads, EarlyZScalesPixelAndOutputMerger) {
  GpuProfile p = game_profile();
  ShaderLibrary lib = one_shader("p", "add r0\nsample r0, v0, t0, s0\n");
  BatchRecord b;
  b.ps_shader = "p";
  b.fragment_count = 5000;
  b.rt_width = 64;
  b.rt_height = 32;
  StageLoadVector on = true_loads(p, b, lib, true), off = true_loads(p, b, lib, false);
  EXPECT_DOUBLE_EQ(on[Stage::kPS], off[Stage::kPS] * (1 - p.early_z_cull));
  EXPECT_DOUBLE_EQ(on[Stage::kOM], off[Stage::kOM] * (1 - p.early_z_cull));
  EXPECT_EQ(on[Stage::kRas], off[Stage::kRas]);
}

TEST(Profile, Validation) {
  GpuProfile p = reference_profile();
  EXPECT_NO_THROW(p.validate());
  p.overhead_ms = 0;
  EXPECT_THROW(p.validate(), InvariantError);
  p = reference_profile();
  p.curves[index_of(Stage::kGS)].reset();
  EXPECT_THROW(p.validate(), InvariantError);
  p = reference_profile();
  p.curves[index_of(Stage::kRas)]->slope2 = 0;
  EXPECT_THROW(p.validate(), InvariantError);
}

TEST(Profile, ShippedFilesMatchBuiltins) {
  std::filesystem::path dir = std::filesystem::path(GAMORRA_CONFIG_DIR) / "profiles";
  for (const GpuProfile& p : {reference_profile(), linear_profile(), game_profile()}) {
    GpuProfile loaded = load_profile(dir / (p.name + ".json"));
    EXPECT_EQ(profile_to_json(loaded), profile_to_json(p)) << p.name;
    EXPECT_EQ(profile_to_json(profile_from_json(profile_to_json(p))), profile_to_json(p));
  }
  EXPECT_THROW(load_profile(dir / "nope.json"), MissingDataError);
}

ScenarioConfig small_scenario(std::uint64_t seed) {
  ScenarioConfig c;
  c.frames = 40;
  c.seed = seed;
  c.templates = 6;
  c.stages = {"ia", "vs", "hs", "tess", "ds", "gs", "ras", "ps", "om", "cs"};
  return c;
}

TEST(GenerateSequence, Deterministic) {
  SimulatedRun a = generate_sequence(game_profile(), small_scenario(7));
  SimulatedRun b = generate_sequence(game_profile(), small_scenario(7));
  EXPECT_EQ(a.sequence, b.sequence);
  EXPECT_EQ(a.actual_ms, b.actual_ms);
  SimulatedRun c = generate_sequence(game_profile(), small_scenario(8));
  EXPECT_NE(a.actual_ms, c.actual_ms);
}

TEST(GenerateSequence, TracesAreValidAndRoundTrip) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimulatedRun run = generate_sequence(game_profile(), small_scenario(seed));
    std::ostringstream out;
    write_trace(run.sequence, out);
    std::istringstream in(out.str());
    EXPECT_EQ(parse_trace(in, run.sequence.shader_store), run.sequence);
    for (double t : run.actual_ms) EXPECT_GT(t, 0.0);
  }
}

TEST(GenerateSequence, StageMaskIsEnforced) {
  ScenarioConfig c = small_scenario(2);
  c.stages = {"ia", "vs", "ras", "ps", "om"};
  c.frames = 100;
  SimulatedRun run = generate_sequence(game_profile(), c);
  std::size_t batches = 0;
  for (const FrameRecord& f : run.sequence.frames) {
    for (const BatchRecord& b : f.batches) {
      ++batches;
      EXPECT_FALSE(b.gs_shader);
      EXPECT_FALSE(b.hs_shader);
      EXPECT_FALSE(b.cs_shader);
      EXPECT_TRUE(b.tess_points_per_patch.empty());
    }
  }
  EXPECT_GT(batches, 0u);
  c.stages = {"vs", "hs", "ras"};
  EXPECT_THROW(generate_sequence(game_profile(), c), InvariantError);
}

TEST(GenerateSequence, DriftMultipliesFrameTime) {
  // Two runs that differ only by an "all" drift event: every frame from the
  // event on is scaled by exactly the multiplier, noise included.
  GpuProfile p = game_profile();
  ScenarioConfig c = small_scenario(4);
  c.frames = 200;
  SimulatedRun base = generate_sequence(p, c);
  c.drift = {{100, {"all"}, 1.3}};
  SimulatedRun drifted = generate_sequence(p, c);
  ASSERT_EQ(base.sequence, drifted.sequence);
  for (std::size_t i = 0; i < 200; ++i) {
    double want = i < 100 ? base.actual_ms[i] : 1.3 * base.actual_ms[i];
    EXPECT_NEAR(drifted.actual_ms[i], want, 1e-9 * want);
  }
}

TEST(GenerateSequence, StageDriftMeanRatio) {
  // A stage-only drift raises the mean noisy frame time by the stage's share.
  GpuProfile p = game_profile();
  p.noise_sigma = 0.1;
  ScenarioConfig c = small_scenario(5);
  c.frames = 4000;
  c.drift = {{0, {"ps"}, 2.0}};
  SimulatedRun run = generate_sequence(p, c);
  ShaderLibrary lib = parse_shader_store(run.sequence.shader_store);
  double sum_ratio = 0.0;
  for (std::size_t i = 0; i < run.actual_ms.size(); ++i) {
    SimConditions cond;
    cond.drift[index_of(Stage::kPS)] = 2.0;
    sum_ratio += run.actual_ms[i] / frame_cost(p, run.sequence.frames[i], lib, cond);
  }
  EXPECT_NEAR(sum_ratio / double(run.actual_ms.size()), 1.0, 4 * 0.1 / std::sqrt(4000.0));
}

TEST(GenerateSequence, FrequencySteps) {
  ScenarioConfig c = small_scenario(6);
  c.frequency = {{0, 800}, {20, 1600}};
  SimulatedRun run = generate_sequence(game_profile(), c);
  EXPECT_EQ(run.freq_mhz[19], 800.0);
  EXPECT_EQ(run.freq_mhz[20], 1600.0);
}

TEST(Actuals, WriteRead) {
  SimulatedRun run = generate_sequence(game_profile(), small_scenario(9));
  auto path = std::filesystem::temp_directory_path() / "gamorra_actuals.csv";
  write_actuals(path, run.sequence.frames, run.actual_ms, run.freq_mhz);
  Actuals a = read_actuals(path);
  EXPECT_EQ(a.actual_ms, run.actual_ms);
  EXPECT_EQ(a.freq_mhz, run.freq_mhz);
  std::ofstream(path) << "frame,actual_ms\n0,-1\n";
  EXPECT_THROW(read_actuals(path), ParseError);
  std::ofstream(path) << "0,5\n1,6\n";
  EXPECT_EQ(read_actuals(path).freq_mhz, (std::vector<double>{0, 0}));
  std::filesystem::remove(path);
}

TEST(Scenario, ShippedConfigsLoad) {
  for (auto& e : std::filesystem::directory_iterator(std::filesystem::path(GAMORRA_CONFIG_DIR) / "scenarios")) {
    EXPECT_NO_THROW(load_scenario(e.path())) << e.path();
  }
  EXPECT_THROW(scenario_from_json(nlohmann::json{{"stages", {"xs"}}}), InvariantError);
  EXPECT_THROW(scenario_from_json(nlohmann::json{{"frames", 0}}), InvariantError);
}

}  // namespace
}  // namespace gamorra
