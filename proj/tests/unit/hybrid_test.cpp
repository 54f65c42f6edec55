#include <gtest/gtest.h>

#include <cmath>

#include "wmlab/error.hpp"
#include "wmlab/hybrid.hpp"
#include "wmlab/randomness.hpp"

using namespace wmlab;

namespace {

std::vector<LabeledFeature> blobs(std::size_t n, std::uint64_t seed, double shift = 1.5) {
  Rng rng(seed);
  std::vector<LabeledFeature> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i % 2 == 0;
    out.push_back({{rng.normal() + (y ? shift : 0.0), 3.0 * rng.normal() + (y ? 2 * shift : 0.0)}, y});
  }
  return out;
}

double accuracy(const CombinerModel& m, std::span<const LabeledFeature> d) {
  std::size_t ok = 0;
  for (const auto& r : d) ok += m.predict(r.f) == r.label;
  return static_cast<double>(ok) / d.size();
}

}  // namespace

TEST(Cascade1sPredict, InfiniteDetectorThresholdIsWatermarkOnly) {
  CascadeThresholds t;
  t.lambda_w = 0.5;
  for (double w : {0.1, 0.5, 0.9}) EXPECT_EQ(cascade_1s_predict({w, 1e300}, t), w >= 0.5);
}

TEST(Cascade2sPredict, RejectsInvertedBand) {
  CascadeThresholds t;
  t.lambda_w_low = 0.8;
  t.lambda_w_high = 0.2;
  EXPECT_THROW(cascade_2s_predict({0.5, 0.0}, t), ValidationError);
}

TEST(Cascade2sPredict, CollapsedBandIsWatermarkOnly) {
  CascadeThresholds t;
  t.lambda_w_low = 0.5;
  t.lambda_w_high = 0.5;
  t.lambda_d = -kInf;
  EXPECT_TRUE(cascade_2s_predict({0.5, 0.0}, t));
  EXPECT_FALSE(cascade_2s_predict({0.49, 0.0}, t));
}

TEST(ZNorm, ConstantFeatureInactive) {
  std::vector<LabeledFeature> d{{{1.0, 2.0}, true}, {{1.0, 3.0}, false}};
  const auto z = ZNorm::fit(d);
  EXPECT_FALSE(z.active[0]);
  EXPECT_TRUE(z.active[1]);
  EXPECT_EQ(z.dims(), 1u);
}

TEST(FitLogistic, ConvergesAndSeparates) {
  const auto d = blobs(400, 1);
  const auto m = fit_logistic(d);
  const auto& p = std::get<LogisticParams>(m.params);
  EXPECT_LT(p.grad_norm, 1e-6);
  EXPECT_GT(accuracy(m, d), 0.75);
}

TEST(FitLogistic, SerializeRoundTrip) {
  const auto d = blobs(100, 2);
  const auto m = fit_logistic(d);
  const auto back = CombinerModel::deserialize(m.serialize());
  for (const auto& r : d) ASSERT_EQ(back.predict_proba(r.f), m.predict_proba(r.f));
}

TEST(FitMlp, LossDecreasesAndFits) {
  const auto d = blobs(300, 3);
  MlpOptions opt;
  opt.epochs = 60;
  const auto m = fit_mlp(d, opt);
  const auto& p = std::get<MlpParams>(m.params);
  ASSERT_FALSE(p.loss_curve.empty());
  EXPECT_LT(p.loss_curve.back(), p.loss_curve.front());
  EXPECT_GT(accuracy(m, d), 0.75);
}

TEST(FitMlp, SeedReproducible) {
  const auto d = blobs(100, 4);
  MlpOptions opt;
  opt.epochs = 5;
  EXPECT_EQ(fit_mlp(d, opt).serialize(), fit_mlp(d, opt).serialize());
}

TEST(FitTree, DepthBoundedAndPure) {
  const auto d = blobs(300, 5);
  const auto m = fit_tree(d);
  EXPECT_LE(m.tree_depth(), 3u);
  EXPECT_GT(accuracy(m, d), 0.75);
  std::vector<LabeledFeature> sep{{{0, 0}, false}, {{1, 0}, false}, {{2, 0}, true}, {{3, 0}, true}};
  const auto t = fit_tree(sep);
  EXPECT_EQ(accuracy(t, sep), 1.0);
  EXPECT_EQ(t.tree_depth(), 1u);
}

TEST(GiniImpurity, ClosedForm) {
  EXPECT_DOUBLE_EQ(gini_impurity(5, 10), 0.5);
  EXPECT_DOUBLE_EQ(gini_impurity(0, 10), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity(1, 4), 1 - 0.0625 - 0.5625);
}

TEST(HitRate, OneStageNeverHitsWithoutThreshold) {
  const std::vector<FeaturePair> f{{0.1, 0}, {0.9, 0}};
  CascadeThresholds t;
  const auto r = hit_rate(f, t, CascadeKind::OneStage);
  EXPECT_EQ(r.gamma_hit, 0.0);
  EXPECT_EQ(r.est_cost_ratio, 1.0);
}
