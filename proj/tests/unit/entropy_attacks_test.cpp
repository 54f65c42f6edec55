#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wmlab/attacks.hpp"
#include "wmlab/dataset.hpp"
#include "wmlab/entropy.hpp"
#include "wmlab/error.hpp"

using namespace wmlab;

namespace {

const Vocabulary kVocab({"p", "q", "r", "s", " p", " q", " r", " s"}, false);

}  // namespace

TEST(NextTokenEntropy, UniformIsLogV) {
  const std::vector<double> p(8, 0.125);
  EXPECT_NEAR(next_token_entropy(p), std::log(8.0), 1e-15);
}

TEST(EstimateResponseEntropy, MemorylessIsHorizonTimesH) {
  const std::vector<double> p{0.0, 0.0, 0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0};
  const MemorylessModel lm(kVocab, p);
  const auto e = estimate_response_entropy(lm, {}, 4, 25, 7);
  EXPECT_EQ(e.n_samples, 4u);
  EXPECT_EQ(e.horizon, 25u);
  EXPECT_EQ(e.short_samples, 0u);
  EXPECT_NEAR(e.total, 25 * next_token_entropy(p), 1e-12);
}

TEST(EntropyFromSamples, ShortSamplesCounted) {
  const MemorylessModel lm = MemorylessModel::uniform(kVocab);
  std::vector<TokenSequence> s{{2, 3}, {2, 3, 4, 5}};
  const auto e = entropy_from_samples(lm, {}, s, 4);
  EXPECT_EQ(e.short_samples, 1u);
}

TEST(BucketByEntropy, SizesDifferByAtMostOne) {
  for (std::size_t n : {5u, 12u, 23u, 100u}) {
    std::vector<PromptEntropy> est;
    for (std::size_t i = 0; i < n; ++i) est.push_back({"p" + std::to_string(1000 + i), std::fmod(i * 7.3, 11.0)});
    const auto b = bucket_by_entropy(est);
    std::vector<std::size_t> sizes(5, 0);
    for (const auto& [id, k] : b.assignment) sizes[k]++;
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1u);
    EXPECT_TRUE(std::is_sorted(b.upper.begin(), b.upper.end()));
  }
  std::vector<PromptEntropy> few{{"a", 1}, {"b", 2}};
  EXPECT_THROW(bucket_by_entropy(few), DataError);
}

TEST(RandomTokenReplacement, ChangesExactFraction) {
  TokenSequence t;
  for (TokenId i = 0; i < 200; ++i) t.push_back(2 + i % 50);
  for (double p : {0.0, 10.0, 25.5, 100.0}) {
    const auto out = random_token_replacement(t, p, 60, 3);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < t.size(); ++i) changed += out[i] != t[i];
    EXPECT_EQ(changed, static_cast<std::size_t>(std::floor(p * t.size() / 100)));
  }
}

TEST(RandomTokenReplacement, NeverIntroducesSpecials) {
  TokenSequence t(100, 5);
  const auto out = random_token_replacement(t, 100, 8, 1);
  for (auto id : out) EXPECT_GE(id, Vocabulary::kFirstByte);
}

TEST(ApplyAttackProtocol, OnlyWatermarkedPositivesChange) {
  Dataset d;
  auto rec = [&](std::string id, std::string source, bool pos) {
    DatasetRecord r;
    r.id = id;
    r.prompt_id = "pr/" + id;
    r.dataset = "d";
    r.split = "test";
    r.source = source;
    r.positive = pos;
    r.prompt = "p";
    r.response = "p q r s p q r s p q";
    d.push_back(r);
  };
  rec("1", "ours-watermarked:aaronson", true);
  rec("2", "theirs", false);
  rec("3", "ours-plain", true);
  AttackConfig cfg;
  cfg.p_percent = 50;
  cfg.rng_seed = 4;
  AttackManifest man;
  const auto out = apply_attack_protocol(d, cfg, kVocab, nullptr, &man);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NE(out[0].response, d[0].response);
  EXPECT_EQ(out[1].response, d[1].response);
  EXPECT_EQ(out[2].response, d[2].response);
  EXPECT_EQ(man.corrupted, std::vector<std::string>{"1"});
  ASSERT_TRUE(out[0].attack.has_value());
  EXPECT_EQ(out[0].attack->p_percent, 50.0);
}

TEST(ApplyAttackProtocol, Deterministic) {
  Dataset d;
  DatasetRecord r;
  r.id = "x";
  r.prompt_id = "px";
  r.split = "test";
  r.source = "ours-watermarked:kb-2";
  r.positive = true;
  r.response = "p q r s s r q p";
  d.push_back(r);
  AttackConfig cfg;
  cfg.p_percent = 30;
  EXPECT_EQ(apply_attack_protocol(d, cfg, kVocab, nullptr)[0].response,
            apply_attack_protocol(d, cfg, kVocab, nullptr)[0].response);
}
