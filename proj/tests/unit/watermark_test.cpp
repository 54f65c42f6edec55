#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wmlab/error.hpp"
#include "wmlab/stats.hpp"
#include "wmlab/watermark.hpp"

using namespace wmlab;

namespace {

MemorylessModel flat_model(std::size_t pieces) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < pieces; ++i) names.push_back("w" + std::to_string(i));
  std::vector<double> p(pieces + 2, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < pieces; ++i) z += 1.0 / static_cast<double>(i + 2);
  for (std::size_t i = 0; i < pieces; ++i) p[i + 2] = 1.0 / static_cast<double>(i + 2) / z;
  return MemorylessModel(Vocabulary(names, false), p);
}

const GenerationLimits kLim{60, 60};

}  // namespace

TEST(AaronsonGenerate, DeterministicForKeyAndPrompt) {
  const auto lm = flat_model(40);
  AaronsonConfig cfg;
  cfg.key = WatermarkKey::from_integer(11);
  const TokenSequence prompt{3, 4};
  EXPECT_EQ(aaronson_generate(lm, prompt, cfg, kLim), aaronson_generate(lm, prompt, cfg, kLim));
}

TEST(AaronsonScore, WatermarkedBeatsNull) {
  const auto lm = flat_model(40);
  AaronsonConfig cfg;
  cfg.key = WatermarkKey::from_integer(11);
  const auto wm = aaronson_generate(lm, TokenSequence{5}, cfg, kLim);
  const auto plain = sample(lm, TokenSequence{5}, kLim, 3);
  const auto sw = aaronson_score(wm, cfg);
  const auto sp = aaronson_score(plain, cfg);
  EXPECT_EQ(sw.windows, wm.size() - cfg.n + 1);
  EXPECT_GT(sw.length_aware, 0.999);
  EXPECT_LT(sp.length_aware, sw.length_aware);
}

TEST(AaronsonScore, ShortTextThrows) {
  AaronsonConfig cfg;
  const TokenSequence t{2, 3};
  EXPECT_THROW(aaronson_score(t, cfg), DataError);
}

TEST(AaronsonScore, NullScoresUniform) {
  const auto lm = flat_model(40);
  AaronsonConfig cfg;
  cfg.key = WatermarkKey::from_integer(12);
  std::vector<double> s;
  for (std::uint64_t i = 0; i < 400; ++i) s.push_back(aaronson_score(sample(lm, {}, kLim, i), cfg).length_aware);
  EXPECT_GT(ks_uniform(s).p_value, 0.01);
}

TEST(KirchenbauerIsGreen, GreenFractionNearGamma) {
  KirchenbauerConfig cfg;
  cfg.key = WatermarkKey::from_integer(2);
  std::size_t green = 0;
  const std::vector<TokenId> ctx{4, 5, 6};
  for (TokenId t = 0; t < 8000; ++t) green += kirchenbauer_is_green(ctx, t, cfg);
  EXPECT_NEAR(green / 8000.0, cfg.gamma, 0.02);
}

TEST(KirchenbauerGenerate, RaisesGreenRate) {
  const auto lm = flat_model(40);
  KirchenbauerConfig cfg;
  cfg.key = WatermarkKey::from_integer(8);
  cfg.delta = 3.0;
  const auto wm = kirchenbauer_generate(lm, {}, cfg, kLim, 1);
  const auto s = kirchenbauer_score(wm, cfg);
  EXPECT_GT(s.z, 4.0);
  EXPECT_GT(static_cast<double>(s.green) / s.unique_ngrams, cfg.gamma);
}

TEST(KirchenbauerScore, DeduplicatesRepeatedNgrams) {
  KirchenbauerConfig cfg;
  cfg.n = 2;
  const TokenSequence t{5, 6, 5, 6, 5, 6};
  EXPECT_EQ(kirchenbauer_score(t, cfg).unique_ngrams, 2u);
}

TEST(KirchenbauerBias, ZeroDeltaIsIdentity) {
  KirchenbauerConfig cfg;
  cfg.delta = 0.0;
  const std::vector<double> p{0.0, 0.1, 0.2, 0.7};
  const std::vector<TokenId> w{1, 2, 3};
  const auto q = kirchenbauer_bias(p, w, cfg);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(q[i], p[i], 1e-15);
}

TEST(BahriGenerateStep, DistortionFreeOverKeys) {
  const Vocabulary v({"a", "b", "c", "d"}, false);
  const MemorylessModel lm(v, {0.0, 0.0, 0.1, 0.2, 0.3, 0.4});
  std::vector<std::size_t> counts(4, 0);
  for (std::uint64_t k = 0; k < 4000; ++k) {
    BahriConfig cfg;
    cfg.m = 16;
    cfg.key = WatermarkKey::from_integer(k);
    counts[bahri_generate_step(lm, {}, {}, cfg, k + 100) - 2]++;
  }
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  EXPECT_GT(chi_square_gof(counts, p).p_value, 0.001);
}

TEST(BahriScore, WatermarkedBeatsPlain) {
  const auto lm = flat_model(40);
  BahriConfig cfg;
  cfg.m = 64;
  cfg.key = WatermarkKey::from_integer(21);
  const auto wm = bahri_generate(lm, {}, cfg, kLim, 5);
  const auto plain = sample(lm, {}, kLim, 5);
  EXPECT_GT(bahri_score(wm, cfg).value, bahri_score(plain, cfg).value);
  EXPECT_GT(bahri_score(wm, cfg).value, 0.99);
}

TEST(BahriStep, CandidatesSortedAndCounted) {
  Rng rng(1);
  BahriConfig cfg;
  cfg.m = 32;
  const std::vector<double> p{0.0, 0.0, 0.5, 0.25, 0.25};
  const auto st = bahri_step(p, std::vector<TokenId>{0, 0, 0}, cfg, rng);
  std::size_t total = 0;
  for (std::size_t i = 0; i < st.candidates.size(); ++i) {
    total += st.candidates[i].count;
    if (i) EXPECT_LT(st.candidates[i - 1].token, st.candidates[i].token);
  }
  EXPECT_EQ(total, cfg.m);
}

TEST(KuditipudiGenerate, FollowsSeedList) {
  const auto lm = flat_model(30);
  auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(4), 64);
  const auto a = kuditipudi_generate(lm, {}, cfg, kLim, 3);
  const auto b = kuditipudi_generate(lm, {}, cfg, kLim, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), kLim.max_new);
}

TEST(KuditipudiPrecomputeReferences, TablesSortedPerLength) {
  const auto lm = flat_model(30);
  auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(4), 32);
  cfg.n_ref = 40;
  std::vector<TokenSequence> null;
  for (std::uint64_t i = 0; i < 60; ++i) null.push_back(sample(lm, {}, {80, 80}, 1000 + i));
  const std::vector<std::size_t> lengths{20, 40};
  const auto refs = kuditipudi_precompute_references(cfg, null, lengths, 1);
  for (auto L : lengths) {
    const auto& c = refs.costs(L);
    ASSERT_EQ(c.size(), cfg.n_ref);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  }
  EXPECT_EQ(refs.seed_list_digest(), cfg.seed_list_digest());
}

TEST(KuditipudiScore, PValueOnGridAndSeparates) {
  const auto lm = flat_model(30);
  auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(4), 32);
  cfg.n_ref = 50;
  std::vector<TokenSequence> null;
  for (std::uint64_t i = 0; i < 80; ++i) null.push_back(sample(lm, {}, {60, 60}, 2000 + i));
  const std::vector<std::size_t> lengths{40};
  const auto refs = kuditipudi_precompute_references(cfg, null, lengths, 1);
  const auto wm = kuditipudi_generate(lm, {}, cfg, {50, 50}, 9);
  const auto s = kuditipudi_score(wm, cfg, refs);
  EXPECT_EQ(s.scored_length, 40u);
  const double scaled = s.p_value * (cfg.n_ref + 1);
  EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  EXPECT_LE(s.p_value, 2.0 / (cfg.n_ref + 1));
}

TEST(KuditipudiScore, MismatchedSeedListThrows) {
  auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(4), 32);
  auto other = KuditipudiConfig::from_key(WatermarkKey::from_integer(5), 32);
  KuditipudiReferences refs(other.seed_list_digest(), 1.0);
  refs.set(10, std::vector<double>(5, 0.0));
  const TokenSequence t(12, 3);
  EXPECT_THROW(kuditipudi_score(t, cfg, refs), DataError);
}

TEST(KuditipudiAlignmentCost, MinOverShiftsIsMinimum) {
  auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(4), 16);
  const TokenSequence t{3, 4, 5, 6, 7, 8, 9};
  double lo = INFINITY;
  for (std::size_t s = 0; s < cfg.seed_list.size(); ++s) lo = std::min(lo, kuditipudi_alignment_cost(t, cfg, s));
  EXPECT_DOUBLE_EQ(kuditipudi_min_cost(t, cfg), lo);
}
