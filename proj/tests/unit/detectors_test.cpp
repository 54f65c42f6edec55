#include <gtest/gtest.h>

#include <cmath>

#include "wmlab/detectors.hpp"

using namespace wmlab;

namespace {

const Vocabulary kVocab({"x", "y", "z"}, false);
const std::vector<double> kP{0.0, 0.0, 0.5, 0.3, 0.2};

}  // namespace

TEST(LogLikelihoodScore, MeanLogProbByHand) {
  const MemorylessModel lm(kVocab, kP);
  const TokenSequence t{2, 3, 4, 2};
  const double want = (2 * std::log(0.5) + std::log(0.3) + std::log(0.2)) / 4;
  EXPECT_NEAR(log_likelihood_score(lm, t).value, want, 1e-15);
}

TEST(MeanRankScore, NegatedMeanRank) {
  const MemorylessModel lm(kVocab, kP);
  const TokenSequence t{2, 3, 4, 4};
  EXPECT_DOUBLE_EQ(mean_rank_score(lm, t).value, -(1 + 2 + 3 + 3) / 4.0);
}

TEST(TokenRank, TiesByAscendingId) {
  const std::vector<double> p{0.1, 0.4, 0.4, 0.1};
  EXPECT_EQ(token_rank(p, 1), 1u);
  EXPECT_EQ(token_rank(p, 2), 2u);
  EXPECT_EQ(token_rank(p, 3), 4u);
}

TEST(LrrScore, RatioByHand) {
  const MemorylessModel lm(kVocab, kP);
  const TokenSequence t{3, 4};
  const double want = -(std::log(0.3) + std::log(0.2)) / (std::log(2.0) + std::log(3.0));
  EXPECT_NEAR(lrr_score(lm, t).value, want, 1e-15);
}

TEST(LrrScore, AllRankOneIsSentinel) {
  const MemorylessModel lm(kVocab, kP);
  const TokenSequence t{2, 2};
  const auto s = lrr_score(lm, t);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.value, kSentinelScore);
}

TEST(BinocularsScore, SameModelRatioByHand) {
  const MemorylessModel lm(kVocab, kP);
  const TokenSequence t{2, 3, 4};
  const double cross = 0.5 * std::log(0.5) + 0.3 * std::log(0.3) + 0.2 * std::log(0.2);
  const double want = (std::log(0.5) + std::log(0.3) + std::log(0.2)) / (3 * cross);
  EXPECT_NEAR(binoculars_score(lm, lm, t).value, want, 1e-14);
  EXPECT_NEAR(binoculars_score(binoculars_terms(lm, lm, t)).value, want, 1e-14);
}

TEST(LogLikelihoodScore, ZeroProbabilityIsClamped) {
  const MemorylessModel lm(kVocab, {0.0, 0.0, 1.0, 0.0, 0.0});
  const TokenSequence t{3};
  const auto s = log_likelihood_score(lm, t);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.value, kLogProbFloor);
}

TEST(TrainNgramClassifier, SeparatesRegisters) {
  std::vector<std::string> pos, neg;
  for (int i = 0; i < 40; ++i) {
    pos.push_back("indeed the model notes that clearly item " + std::to_string(i % 7));
    neg.push_back("well honestly i think maybe thing " + std::to_string(i % 5));
  }
  NGramClassifierConfig cfg;
  cfg.dim = 1 << 10;
  cfg.epochs = 10;
  const auto clf = train_ngram_classifier(pos, neg, cfg);
  EXPECT_GT(clf.score("indeed the model notes that clearly"), 0.5);
  EXPECT_LT(clf.score("well honestly i think maybe"), 0.5);
  const auto again = NGramClassifier::deserialize(clf.serialize());
  EXPECT_EQ(again.score("the model"), clf.score("the model"));
}

TEST(TrainNgramClassifier, InputOrderDoesNotMatter) {
  std::vector<std::string> pos{"a b c", "a b d", "a c c"}, neg{"x y z", "x x y", "y z z"};
  NGramClassifierConfig cfg;
  cfg.dim = 256;
  const auto a = train_ngram_classifier(pos, neg, cfg);
  std::reverse(pos.begin(), pos.end());
  std::reverse(neg.begin(), neg.end());
  const auto b = train_ngram_classifier(pos, neg, cfg);
  EXPECT_EQ(a.weights(), b.weights());
}

TEST(NgramFeatures, UnitNorm) {
  const auto f = ngram_features("a b c a b", 64, 3);
  double s = 0.0;
  for (const auto& [i, v] : f) s += v * v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(half_length("a b c d e"), "a b");
}
