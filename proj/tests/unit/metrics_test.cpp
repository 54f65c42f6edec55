#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "wmlab/error.hpp"
#include "wmlab/metrics.hpp"

using namespace wmlab;

namespace {

struct Sample {
  std::vector<double> s;
  std::unique_ptr<bool[]> y;
  std::size_t n = 0;
  std::span<const bool> labels() const { return {y.get(), n}; }
};

Sample random_scores(std::size_t n, std::uint64_t seed, double round_to) {
  Rng rng(seed);
  Sample out;
  out.n = n;
  out.y = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = i % 2 == 0;
    out.s.push_back(std::round((rng.normal() + (out.y[i] ? 0.8 : 0.0)) / round_to) * round_to);
  }
  return out;
}

std::vector<LabeledFeature> features(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledFeature> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i % 2 == 0;
    const double w = y && rng.unit() < 0.5 ? 2.0 + rng.normal() : rng.normal();
    out.push_back({{w, rng.normal() + (y ? 1.0 : 0.0)}, y});
  }
  return out;
}

}  // namespace

TEST(SweepSingleThreshold, AucMatchesRankOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_scores(60 + seed * 7, seed, seed % 2 ? 0.25 : 1e-9);
    const auto roc = sweep_single_threshold(d.s, d.labels());
    EXPECT_NEAR(roc_area(roc), oracle::mann_whitney_auc(d.s, d.labels()), 1e-12);
  }
}

TEST(SweepSingleThreshold, OneClassThrows) {
  const std::vector<double> s{1, 2};
  const bool y[] = {true, true};
  EXPECT_THROW(sweep_single_threshold(s, std::span<const bool>(y, 2)), DataError);
}

TEST(ParetoFront, StrictlyIncreasingWithAnchors) {
  Rng rng(3);
  std::vector<RocPoint> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({rng.unit(), rng.unit(), {}});
  const auto f = pareto_front(pts);
  ASSERT_GE(f.points.size(), 2u);
  EXPECT_EQ(f.points.front().fpr, 0.0);
  EXPECT_EQ(f.points.front().tpr, 0.0);
  EXPECT_EQ(f.points.back().fpr, 1.0);
  EXPECT_EQ(f.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < f.points.size(); ++i) {
    EXPECT_LT(f.points[i - 1].fpr, f.points[i].fpr);
    EXPECT_LT(f.points[i - 1].tpr, f.points[i].tpr);
  }
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : f.points) dominated |= q.fpr <= p.fpr && q.tpr >= p.tpr;
    EXPECT_TRUE(dominated);
  }
}

TEST(Paucc, DiagonalAndPerfect) {
  RocCurve diag{{{0, 0, {}}, {1, 1, {}}}, {}};
  RocCurve perfect{{{0, 0, {}}, {0, 1, {}}, {1, 1, {}}}, {}};
  for (double f : {0.01, 0.1, 1.0}) {
    EXPECT_NEAR(paucc(diag, f), 50.0, 1e-9);
    EXPECT_NEAR(paucc(perfect, f), 100.0, 1e-9);
  }
  EXPECT_THROW(paucc(diag, 0.0), ValidationError);
  EXPECT_THROW(paucc(diag, 1.5), ValidationError);
}

TEST(Percentile, MatchesNumpyLinear) {
  const std::vector<double> v{5, 1, 3, 2, 4};
  EXPECT_DOUBLE_EQ(percentile(v, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 100), 5.0);
  EXPECT_DOUBLE_EQ(percentile(v, 30), 2.2);
}

TEST(CandidateThresholds, IncludesInfinitiesSortedUnique) {
  const std::vector<double> v{3, 1, 2, 2};
  const auto t = candidate_thresholds(v, 0.0);
  EXPECT_EQ(t, (std::vector<double>{-INFINITY, 1, 2, 3, INFINITY}));
}

TEST(SweepCascadeGrid, FrontMatchesBruteForce) {
  const auto d = features(60, 9);
  for (auto kind : {CascadeKind::OneStage, CascadeKind::TwoStage}) {
    const auto front = sweep_cascade_grid(d, kind, 0.0);
    std::vector<double> w, s;
    for (const auto& r : d) {
      w.push_back(r.f.s_w);
      s.push_back(r.f.s_d);
    }
    const auto tw = candidate_thresholds(w, 0.0);
    const auto td = candidate_thresholds(s, 0.0);
    std::vector<RocPoint> pts;
    for (std::size_t a = 0; a < tw.size(); ++a) {
      for (std::size_t b = (kind == CascadeKind::TwoStage ? a : 0); b < tw.size(); ++b) {
        for (double l : td) {
          CascadeThresholds t;
          if (kind == CascadeKind::OneStage) {
            if (b) break;
            t.lambda_w = tw[a];
          } else {
            t.lambda_w_low = tw[a];
            t.lambda_w_high = tw[b];
          }
          t.lambda_d = l;
          const auto [fpr, tpr] = oracle::rates(d, [&](const FeaturePair& f) { return cascade_predict(kind, f, t); });
          pts.push_back({fpr, tpr, {}});
        }
      }
    }
    const auto want = pareto_front(pts);
    ASSERT_EQ(front.points.size(), want.points.size());
    for (std::size_t i = 0; i < want.points.size(); ++i) {
      EXPECT_DOUBLE_EQ(front.points[i].fpr, want.points[i].fpr);
      EXPECT_DOUBLE_EQ(front.points[i].tpr, want.points[i].tpr);
    }
  }
}

TEST(SweepCascadeGrid, ThresholdProvenanceReproducesPoint) {
  const auto d = features(80, 10);
  const auto front = sweep_cascade_grid(d, CascadeKind::TwoStage, 5.0);
  for (const auto& p : front.points) {
    if (p.thresholds.empty()) continue;
    CascadeThresholds t;
    t.lambda_w_low = p.thresholds[0];
    t.lambda_w_high = p.thresholds[1];
    t.lambda_d = p.thresholds[2];
    const auto [fpr, tpr] = oracle::rates(d, [&](const FeaturePair& f) { return cascade_2s_predict(f, t); });
    EXPECT_DOUBLE_EQ(fpr, p.fpr);
    EXPECT_DOUBLE_EQ(tpr, p.tpr);
  }
}

TEST(CalibrateAccuracy, BalancedAccuracyMatchesConfusionOracle) {
  const auto cal = features(200, 11);
  const auto test = features(200, 12);
  for (auto m : {Method::WatermarkOnly, Method::DetectorOnly, Method::OneStage, Method::TwoStage, Method::LR,
                 Method::Tree}) {
    const auto c = calibrate_accuracy(cal, m);
    auto pred = std::make_unique<bool[]>(test.size());
    auto y = std::make_unique<bool[]>(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      pred[i] = c.predict(test[i].f);
      y[i] = test[i].label;
    }
    const auto oc = oracle::confusion({pred.get(), test.size()}, {y.get(), test.size()});
    EXPECT_EQ(c.accuracy(test), oracle::balanced_accuracy(oc)) << to_string(m);
  }
}

TEST(CalibrateAccuracy, SingleScoreIsOptimalOnCalibration) {
  const auto cal = features(100, 13);
  const auto c = calibrate_accuracy(cal, Method::WatermarkOnly);
  double best = 0.0;
  for (const auto& r : cal) {
    CalibratedMethod probe = c;
    probe.thresholds.lambda_w = r.f.s_w;
    best = std::max(best, probe.accuracy(cal));
  }
  EXPECT_DOUBLE_EQ(c.accuracy(cal), best);
}

TEST(BootstrapSe, ReplicatesClassBalanced) {
  const auto d = random_scores(50, 1, 1e-9);
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto idx = class_balanced_resample(d.labels(), rng);
    std::size_t pos = 0;
    for (auto i : idx) pos += d.y[i];
    ASSERT_EQ(idx.size(), d.n);
    ASSERT_EQ(pos, d.n / 2);
  }
}

TEST(BootstrapSe, ConstantMetricHasZeroSe) {
  const auto d = random_scores(20, 2, 1e-9);
  const auto r = bootstrap_se(d.labels(), [](std::span<const std::size_t>) { return 0.7; }, 50, 1);
  EXPECT_EQ(r.point, 0.7);
  EXPECT_NEAR(r.se, 0.0, 1e-12);
}

TEST(BootstrapSe, SeedReproducible) {
  const auto d = random_scores(40, 3, 1e-9);
  auto metric = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += d.s[i];
    return s;
  };
  EXPECT_EQ(bootstrap_se(d.labels(), metric, 30, 5).se, bootstrap_se(d.labels(), metric, 30, 5).se);
}

TEST(TruncateRecord, ShortTextUnchanged) {
  const Vocabulary v({"a", " a"}, true);
  bool was_short = false;
  EXPECT_EQ(truncate_record("a a a", 10, v, &was_short), "a a a");
  EXPECT_TRUE(was_short);
  EXPECT_EQ(truncate_record("a a a", 2, v, &was_short), "a a");
  EXPECT_FALSE(was_short);
}

TEST(RequireBalanced, Throws) {
  const bool y[] = {true, true, false};
  EXPECT_THROW(require_balanced(std::span<const bool>(y, 3)), DataError);
}
