#include <gtest/gtest.h>

#include <random>

#include "gamorra/trainer.hpp"

namespace gamorra {
namespace {

std::vector<FrameSample> linear_frames(std::uint64_t seed, std::size_t n, const std::vector<double>& beta,
                                       double noise = 0.0, std::size_t batches = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 2);
  std::normal_distribution<double> e(0, noise > 0 ? noise : 1.0);
  std::vector<FrameSample> out;
  for (std::size_t f = 0; f < n; ++f) {
    FrameSample s;
    double y = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      ExplanatoryVector w(beta.size(), 1.0);
      for (std::size_t c = 1; c < w.size(); ++c) w[c] = u(rng);
      for (std::size_t c = 0; c < w.size(); ++c) y += beta[c] * w[c];
      s.batches.push_back(w);
    }
    s.actual_ms = y + (noise > 0 ? e(rng) : 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

TEST(OfflineTrain, SvdRecoversAndReports) {
  std::vector<double> beta = {0.5, 2, 3, 1};
  auto frames = linear_frames(1, 100, beta);
  OfflineResult r = offline_train(frames, TrainConfig{});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(r.weights.beta[c], beta[c], 1e-9);
  EXPECT_EQ(r.report.train_frames, 70u);
  EXPECT_EQ(r.report.test_frames, 30u);
  EXPECT_LT(r.report.test_mae_ms, 1e-9);
}

TEST(OfflineTrain, SgdCloseToSvd) {
  std::vector<double> beta = {1, 2, 3, 1.5};
  auto frames = linear_frames(2, 600, beta, 0.2);
  TrainConfig cfg;
  cfg.offline_epochs = 400;
  OfflineResult svd = offline_train(frames, cfg);
  cfg.solver = Solver::kSgd;
  OfflineResult sgd = offline_train(frames, cfg);
  ASSERT_GT(sgd.report.epochs_run, 0u);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_NEAR(sgd.weights.beta[c], svd.weights.beta[c], 0.02 * svd.weights.beta[c]);
}

TEST(OfflineTrain, InactiveStageGetsZero) {
  auto frames = linear_frames(3, 80, {1, 2, 0, 3});
  for (auto& f : frames) {
    for (auto& w : f.batches) w[2] = 0.0;
  }
  EXPECT_EQ(offline_train(frames, TrainConfig{}).weights.beta[2], 0.0);
}

TEST(OfflineTrain, InsufficientData) {
  auto frames = linear_frames(4, 5, {1, 1, 1, 1, 1, 1});
  EXPECT_THROW(offline_train(frames, TrainConfig{}), InsufficientDataError);
  EXPECT_THROW(offline_train(std::vector<FrameSample>{}, TrainConfig{}), InsufficientDataError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.initial_lr = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = TrainConfig{};
  c.train_test_split = 1.0;
  EXPECT_THROW(c.validate(), InvariantError);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"patience", 0}}), InvariantError);
  auto j = nlohmann::json{{"initial_lr", 0.05}, {"rmse_window", 4}};
  TrainConfig parsed = train_config_from_json(j);
  EXPECT_EQ(parsed.initial_lr, 0.05);
  EXPECT_EQ(parsed.rmse_window, 4u);
  EXPECT_EQ(parsed.patience, 10u);
}

TEST(TrainConfig, DefaultsFileMatches) {
  TrainConfig c = load_train_config(std::filesystem::path(GAMORRA_CONFIG_DIR) / "train.json");
  TrainConfig d;
  EXPECT_EQ(c.initial_lr, d.initial_lr);
  EXPECT_EQ(c.offline_epochs, d.offline_epochs);
  EXPECT_EQ(c.offline_batch_size, d.offline_batch_size);
  EXPECT_EQ(c.train_test_split, d.train_test_split);
  EXPECT_EQ(c.patience, d.patience);
  EXPECT_EQ(c.rmse_threshold_ms, d.rmse_threshold_ms);
  EXPECT_EQ(c.rmse_window, d.rmse_window);
  EXPECT_EQ(c.offline_frame_count, d.offline_frame_count);
}

TrainerState online_state(const std::vector<double>& beta, TrainConfig cfg = {}) {
  auto frames = linear_frames(5, 60, beta, 0.05);
  TrainerState st(offline_train(frames, cfg).weights, cfg);
  st.machine.mode = Mode::kOnline;
  return st;
}

TEST(OnlineStep, FixedPointWhenExact) {
  TrainerState st = online_state({1, 2, 3});
  auto before = st.online_weights.beta;
  std::vector<ExplanatoryVector> b = {{1, 0.3, 0.4}, {1, 0.8, 0.1}};
  online_step(st, b, predict_frame(st.online_weights, b));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(st.online_weights.beta[c], before[c], 1e-12);
}

TEST(OnlineStep, SingleBatchIsLmsUpdate) {
  TrainConfig cfg;
  cfg.initial_lr = 1e-3;
  TrainerState st = online_state({1, 2, 3}, cfg);
  std::vector<ExplanatoryVector> b = {{1, 1.1, 0.9}};
  auto g = st.online_weights.standardized();
  auto z = st.online_weights.scaler.apply(b[0]);
  double energy = linalg::dot(z, z);
  ASSERT_LT(cfg.initial_lr * energy, kMaxLmsGain);
  double r = 5.0 - linalg::dot(g, z);
  online_step(st, b, 5.0);
  auto g2 = st.online_weights.standardized();
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_NEAR(g2[n], g[n] + cfg.initial_lr * r * z[n], 1e-12);
  // Residual shrinks by exactly (1 - eta |z|^2).
  double r2 = 5.0 - predict_frame(st.online_weights, b);
  EXPECT_NEAR(r2, r * (1 - cfg.initial_lr * energy), 1e-9);
}

TEST(OnlineStep, RejectedInOfflineMode) {
  TrainerState st = online_state({1, 2});
  st.machine.mode = Mode::kOffline;
  EXPECT_THROW(online_step(st, std::vector<ExplanatoryVector>{{1, 1}}, 1.0), InvariantError);
}

TEST(OnlineStep, TracksDriftBetterThanFrozenWeights) {
  std::vector<double> beta = {1, 2, 3};
  auto train = linear_frames(6, 100, beta);
  TrainConfig cfg;
  ModelWeights w = offline_train(train, cfg).weights;
  TrainerState st(w, cfg);
  st.machine.mode = Mode::kOnline;
  auto drift = linear_frames(7, 100, {1, 2.6, 3.9});
  double err_online = 0.0, err_frozen = 0.0;
  for (const FrameSample& f : drift) {
    err_online += std::abs(predict_frame(st.online_weights, f.batches) - f.actual_ms);
    err_frozen += std::abs(predict_frame(w, f.batches) - f.actual_ms);
    online_step(st, f.batches, f.actual_ms);
  }
  EXPECT_LT(err_online, 0.5 * err_frozen);
}

TEST(ModeMachine, OfflineEntersOnlineAboveThreshold) {
  ModeMachine m;
  EXPECT_FALSE(m.step(0, 0.4, 0.5, 10).entered_online);
  EXPECT_EQ(m.mode, Mode::kOffline);
  EXPECT_TRUE(m.step(0, 0.6, 0.5, 10).entered_online);
  EXPECT_EQ(m.mode, Mode::kOnline);
  EXPECT_EQ(m.violations, 0u);
}

TEST(ModeMachine, ViolationCountingRules) {
  ModeMachine m;
  m.mode = Mode::kOnline;
  m.step(0.6, 0.7, 0.5, 10);  // above threshold, but offline is worse
  EXPECT_EQ(m.violations, 0u);
  m.step(0.4, 0.1, 0.5, 10);  // under threshold
  EXPECT_EQ(m.violations, 0u);
  m.step(0.6, 0.1, 0.5, 10);
  EXPECT_EQ(m.violations, 1u);
  m.step(0.1, 0.0, 0.5, 10);  // counter is not reset by a good frame
  EXPECT_EQ(m.violations, 1u);
}

TEST(ModeMachine, PatienceTenLeavesOnEleventhViolation) {
  ModeMachine m;
  m.mode = Mode::kOnline;
  for (int i = 1; i <= 10; ++i) {
    EXPECT_FALSE(m.step(1.0, 0.2, 0.5, 10).left_online);
    EXPECT_EQ(m.mode, Mode::kOnline);
  }
  EXPECT_TRUE(m.step(1.0, 0.2, 0.5, 10).left_online);
  EXPECT_EQ(m.mode, Mode::kOffline);
  EXPECT_EQ(m.violations, 0u);
}

TEST(ModeDecide, EntryResetsOnlineWeightsAndWindow) {
  TrainConfig cfg;
  cfg.rmse_window = 3;
  TrainerState st(ModelWeights::zeros(2), cfg);
  st.offline_weights.beta = {1, 1};
  st.online_weights.beta = {9, 9};
  mode_decide(st, 0, 0, 0.1);
  EXPECT_EQ(st.mode(), Mode::kOffline);
  auto t = mode_decide(st, 5, 5, 0.0);
  EXPECT_TRUE(t.entered_online);
  EXPECT_EQ(st.online_weights.beta, st.offline_weights.beta);
  EXPECT_EQ(st.window_on.size(), st.window_off.size());
  EXPECT_DOUBLE_EQ(st.rmse_on(), st.rmse_off());
  for (int i = 0; i < 5; ++i) mode_decide(st, 0, 0, 0);
  EXPECT_EQ(st.window_on.size(), 3u);
}

TEST(HybridEstimator, OfflineWeightsNeverMutate) {
  std::vector<double> beta = {1, 2, 3};
  TrainConfig cfg;
  cfg.rmse_threshold_ms = 0.01;
  ModelWeights w = offline_train(linear_frames(8, 100, beta), cfg).weights;
  HybridEstimator est(w, cfg);
  bool went_online = false;
  for (const FrameSample& f : linear_frames(9, 200, {1.5, 2.5, 3})) {
    est.predict(f.batches);
    FrameLog log = est.observe(f.actual_ms);
    went_online |= est.state().mode() == Mode::kOnline;
    EXPECT_EQ(est.state().offline_weights.beta, w.beta);
    EXPECT_DOUBLE_EQ(log.estimate_off, predict_frame(w, f.batches));
  }
  EXPECT_TRUE(went_online);
}

TEST(HybridEstimator, OfflineOnlyModeStaysOffline) {
  TrainConfig cfg;
  cfg.rmse_threshold_ms = 0.0;
  ModelWeights w = offline_train(linear_frames(10, 50, {1, 2}), cfg).weights;
  HybridEstimator est(w, cfg, false);
  for (const FrameSample& f : linear_frames(11, 50, {3, 5})) {
    double e = est.predict(f.batches);
    FrameLog log = est.observe(f.actual_ms);
    EXPECT_EQ(log.mode, Mode::kOffline);
    EXPECT_EQ(e, log.estimate_off);
  }
}

}  // namespace
}  // namespace gamorra
