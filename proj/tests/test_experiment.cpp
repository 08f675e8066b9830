#include <gtest/gtest.h>

#include "gamorra/bench.hpp"
#include "gamorra/experiment.hpp"
#include "test_support.hpp"

namespace gamorra {
namespace {

ScenarioConfig scenario(std::uint64_t frames, std::uint64_t seed) {
  ScenarioConfig c;
  c.frames = frames;
  c.seed = seed;
  c.templates = 6;
  c.presence = 1.0;
  return c;
}

TEST(Experiment, NoiseFreeLinearRunIsRecoveredExactly) {
  GpuProfile p = linear_profile();
  PerfModel perf = run_suite(p);
  SimulatedRun run = generate_sequence(p, scenario(300, 1));
  Actuals a = testing::to_actuals(run);
  OfflineResult fit = fit_trace(run.sequence, a, perf, TrainConfig{});
  EXPECT_NEAR(fit.weights.beta[0], p.overhead_ms, 1e-6);
  EXPECT_LT(fit.report.test_mae_ms, 1e-6);
  auto logs = run_trace(run.sequence, a, perf, fit.weights, TrainConfig{}, true);
  for (const FrameLog& l : logs) {
    EXPECT_EQ(l.mode, Mode::kOffline);
    EXPECT_NEAR(l.estimate, l.actual, 1e-6 * l.actual);
  }
}

TEST(Experiment, ActualsMustMatchTrace) {
  SimulatedRun run = generate_sequence(game_profile(), scenario(20, 2));
  Actuals a = testing::to_actuals(run);
  a.actual_ms.pop_back();
  EXPECT_THROW(check_actuals(run.sequence, a), InvariantError);
  a = testing::to_actuals(run);
  a.frame[3] = 99;
  EXPECT_THROW(check_actuals(run.sequence, a), InvariantError);
}

TEST(Experiment, WeightsDimensionChecked) {
  GpuProfile p = game_profile();
  PerfModel perf = run_suite(p);
  SimulatedRun run = generate_sequence(p, scenario(20, 3));
  EXPECT_THROW(run_trace(run.sequence, testing::to_actuals(run), perf, ModelWeights::zeros(4), TrainConfig{}, true),
               InvariantError);
}

TEST(Experiment, CompareProducesAllModels) {
  GpuProfile p = game_profile();
  PerfModel perf = run_suite(p);
  ScenarioConfig c = scenario(400, 4);
  c.drift = {{250, {"all"}, 1.3}};
  SimulatedRun run = generate_sequence(p, c);
  TrainConfig cfg;
  cfg.offline_frame_count = 200;
  CompareOptions opts;
  opts.scenario = "unit";
  opts.seed = 4;
  CompareOutput out = compare_models(run.sequence, testing::to_actuals(run), perf, cfg, known_models(), opts);
  ASSERT_EQ(out.results.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out.results[i].model, known_models()[i]);
    EXPECT_EQ(out.logs[known_models()[i]].size(), 200u);
    EXPECT_FALSE(out.results[i].overhead);
  }
  EXPECT_EQ(out.train_report.train_frames + out.train_report.test_frames, 200u);
  bool switched = false;
  for (const FrameLog& l : out.logs["gm-h"]) switched |= l.mode == Mode::kOnline;
  EXPECT_TRUE(switched);
  for (const FrameLog& l : out.logs["gm-of"]) EXPECT_EQ(l.mode, Mode::kOffline);
  // Same inputs, same report.
  CompareOutput again = compare_models(run.sequence, testing::to_actuals(run), perf, cfg, known_models(), opts);
  EXPECT_EQ(report_csv(out.results), report_csv(again.results));
  EXPECT_EQ(frame_log_csv(out.logs["gm-h"]), frame_log_csv(again.logs["gm-h"]));
}

TEST(Experiment, CompareErrors) {
  GpuProfile p = game_profile();
  PerfModel perf = run_suite(p);
  SimulatedRun run = generate_sequence(p, scenario(50, 5));
  Actuals a = testing::to_actuals(run);
  EXPECT_THROW(compare_models(run.sequence, a, perf, TrainConfig{}, {"gm-h"}), InsufficientDataError);
  TrainConfig cfg;
  cfg.offline_frame_count = 30;
  EXPECT_THROW(compare_models(run.sequence, a, perf, cfg, {"lstm"}), InvariantError);
}

TEST(Experiment, FrameLogCsv) {
  FrameLog l;
  l.frame = 7;
  l.mode = Mode::kOnline;
  l.estimate_on = 1.5;
  l.estimate_off = 2;
  l.actual = 3;
  l.n_v = 2;
  std::vector<FrameLog> logs = {l};
  EXPECT_EQ(frame_log_csv(logs), std::string(kFrameLogHeader) +
                                     "\n7,online,1.500000,2.000000,3.000000,0.000000,0.000000,2\n");
  EXPECT_NE(frame_log_csv(logs, "ar").find(",ar,"), std::string::npos);
}

}  // namespace
}  // namespace gamorra
