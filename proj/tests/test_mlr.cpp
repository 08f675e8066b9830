#include <gtest/gtest.h>

#include <random>

#include "gamorra/mlr.hpp"

namespace gamorra {
namespace {

// Normal equations W^T W beta = W^T Y solved by Gaussian elimination with
// partial pivoting; shares no code with the SVD path.
std::vector<double> normal_equations(const linalg::Matrix& w, const std::vector<double>& y) {
  const std::size_t d = w.cols();
  std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) a[r][c] += w(i, r) * w(i, c);
      a[r][d] += w(i, r) * y[i];
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < d; ++r) {
      if (std::abs(a[r][k]) > std::abs(a[p][k])) p = r;
    }
    std::swap(a[k], a[p]);
    for (std::size_t r = k + 1; r < d; ++r) {
      double f = a[r][k] / a[k][k];
      for (std::size_t c = k; c <= d; ++c) a[r][c] -= f * a[k][c];
    }
  }
  std::vector<double> x(d);
  for (std::size_t k = d; k-- > 0;) {
    double s = a[k][d];
    for (std::size_t c = k + 1; c < d; ++c) s -= a[k][c] * x[c];
    x[k] = s / a[k][k];
  }
  return x;
}

ObservationSet random_system(std::mt19937_64& rng, std::size_t m, std::size_t dim, const std::vector<double>& beta,
                             double noise) {
  std::uniform_real_distribution<double> u(0, 10);
  std::normal_distribution<double> n(0, noise);
  ObservationSet obs{linalg::Matrix(m, dim), std::vector<double>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    obs.w(i, 0) = 1.0;
    for (std::size_t c = 1; c < dim; ++c) obs.w(i, c) = u(rng);
    double y = 0.0;
    for (std::size_t c = 0; c < dim; ++c) y += beta[c] * obs.w(i, c);
    obs.y[i] = y + (noise > 0 ? n(rng) : 0.0);
  }
  return obs;
}

double rss(const ObservationSet& obs, const std::vector<double>& beta) {
  auto p = obs.w * std::span<const double>(beta);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (obs.y[i] - p[i]) * (obs.y[i] - p[i]);
  return s;
}

TEST(FitSvd, RecoversNoiselessCoefficients) {
  std::mt19937_64 rng(1);
  std::vector<double> beta = {6.966, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ObservationSet obs = random_system(rng, 200, 10, beta, 0.0);
  ModelWeights w = fit_svd(obs);
  for (std::size_t c = 0; c < 10; ++c) EXPECT_NEAR(w.beta[c], beta[c], 1e-9);
  EXPECT_EQ(w.meta.rank, 10u);
  EXPECT_EQ(w.meta.samples, 200u);
}

TEST(FitSvd, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> b(-3, 3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> beta(10);
    for (double& v : beta) v = b(rng);
    ObservationSet obs = random_system(rng, 1000, 10, beta, 0.5);
    auto oracle = normal_equations(obs.w, obs.y);
    ModelWeights w = fit_svd(obs);
    for (std::size_t c = 0; c < 10; ++c) EXPECT_NEAR(w.beta[c], oracle[c], 1e-8);
  }
}

TEST(FitSvd, InterceptOnlyIsMean) {
  ObservationSet obs{linalg::Matrix(4, 1, 1.0), {1, 2, 3, 6}};
  EXPECT_NEAR(fit_svd(obs).beta[0], 3.0, 1e-12);
}

TEST(FitSvd, ZeroColumnGetsZeroCoefficient) {
  std::mt19937_64 rng(3);
  std::vector<double> beta = {1, 2, 0, 3};
  ObservationSet obs = random_system(rng, 50, 4, beta, 0.1);
  for (std::size_t i = 0; i < 50; ++i) obs.w(i, 2) = 0.0;
  ModelWeights w = fit_svd(obs);
  EXPECT_EQ(w.beta[2], 0.0);
  EXPECT_EQ(w.meta.rank, 3u);
  EXPECT_THROW(fit_svd(obs, 0.0), InvariantError);
}

TEST(FitSvd, LeastSquaresOptimality) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0, 1e-3);
  ObservationSet obs = random_system(rng, 300, 6, {1, -1, 2, 0.5, 3, -2}, 1.0);
  ModelWeights w = fit_svd(obs);
  double best = rss(obs, w.beta);
  for (int t = 0; t < 200; ++t) {
    auto p = w.beta;
    for (double& v : p) v += d(rng);
    EXPECT_GE(rss(obs, p), best * (1 - 1e-12));
  }
}

TEST(FitSvd, RescalingEquivariance) {
  std::mt19937_64 rng(5);
  ObservationSet obs = random_system(rng, 100, 5, {2, 1, 3, 4, 5}, 0.3);
  ModelWeights a = fit_svd(obs);
  const double k = 7.5;
  ObservationSet scaled = obs;
  for (std::size_t i = 0; i < 100; ++i) scaled.w(i, 3) *= k;
  ModelWeights b = fit_svd(scaled);
  EXPECT_NEAR(b.beta[3], a.beta[3] / k, 1e-10);
  for (std::size_t c : {0u, 1u, 2u, 4u}) EXPECT_NEAR(b.beta[c], a.beta[c], 1e-9);
}

TEST(FitSvd, Errors) {
  ObservationSet few{linalg::Matrix(3, 5, 1.0), {1, 2, 3}};
  EXPECT_THROW(fit_svd(few), InsufficientDataError);
  ObservationSet bad{linalg::Matrix(3, 1, 1.0), {1, NAN, 3}};
  EXPECT_THROW(fit_svd(bad), InvariantError);
}

TEST(FitSvd, NegativeCoefficientWarning) {
  std::mt19937_64 rng(6);
  ObservationSet obs = random_system(rng, 40, 3, {1, -2, 1}, 0.0);
  ModelWeights w = fit_svd(obs);
  ASSERT_EQ(w.meta.warnings.size(), 1u);
  EXPECT_NE(w.meta.warnings[0].find("beta_1"), std::string::npos);
}

TEST(Standardization, RoundTrip) {
  std::mt19937_64 rng(7);
  ObservationSet obs = random_system(rng, 60, 5, {1, 2, 3, 4, 5}, 0.2);
  ModelWeights w = fit_svd(obs);
  ModelWeights copy = w;
  copy.set_standardized(w.standardized());
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(copy.beta[c], w.beta[c], 1e-10 * std::max(1.0, std::abs(w.beta[c])));
}

TEST(Predict, Examples) {
  ModelWeights w = ModelWeights::zeros(3);
  w.beta = {1, 2, 3};
  ExplanatoryVector v = {1, 1, 1};
  EXPECT_DOUBLE_EQ(predict_batch(w, v), 6.0);
  std::vector<ExplanatoryVector> batches = {v, {1, 0, 0}};
  EXPECT_DOUBLE_EQ(predict_frame(w, batches), 7.0);
  EXPECT_EQ(predict_frame(w, std::vector<ExplanatoryVector>{}), 0.0);
  EXPECT_THROW(predict_batch(w, ExplanatoryVector{1, 1}), InvariantError);
}

TEST(SlidingRmse, Examples) {
  std::vector<EstimatePair> win = {{1, 2}, {3, 2}, {2, 2}, {2, 2}};
  EXPECT_DOUBLE_EQ(sliding_rmse(win), std::sqrt(0.5));
  EXPECT_EQ(sliding_rmse(std::vector<EstimatePair>{{5, 5}}), 0.0);
  EXPECT_THROW(sliding_rmse(std::vector<EstimatePair>{}), InvariantError);
}

TEST(WeightsJson, RoundTrip) {
  std::mt19937_64 rng(8);
  ModelWeights w = fit_svd(random_system(rng, 30, 4, {1, 2, 3, 4}, 0.1));
  ModelWeights back = weights_from_json(nlohmann::json::parse(weights_to_json(w).dump()));
  EXPECT_EQ(back.beta, w.beta);
  EXPECT_EQ(back.scaler.mean, w.scaler.mean);
  EXPECT_EQ(back.scaler.std, w.scaler.std);
  auto path = std::filesystem::temp_directory_path() / "gamorra_w.json";
  save_weights(w, path);
  EXPECT_EQ(load_weights(path).beta, w.beta);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace gamorra
