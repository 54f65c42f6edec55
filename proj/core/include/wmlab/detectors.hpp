#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmlab/language_model.hpp"

namespace wmlab {

/// Detector output; higher means more likely machine-generated.
struct DetectorScore {
  double value = 0.0;
  bool degenerate = false;  // guard or sentinel was used
};

/// Per-token log-probabilities are clamped here when the model gives 0.
inline constexpr double kLogProbFloor = -50.0;
/// Returned (flagged) when a ratio score has a zero denominator.
inline constexpr double kSentinelScore = 1e6;

/// Per-token quantities under empty-prompt conditioning.
struct TokenStats {
  std::vector<double> log_prob;
  std::vector<std::size_t> rank;  // 1 = most likely; ties by ascending id
  bool clamped = false;
};

TokenStats token_stats(const LanguageModel& lm, std::span<const TokenId> text);

/// Rank of `token` in descending probability order, ties broken by ascending id.
std::size_t token_rank(std::span<const double> probs, TokenId token);

/// Mean log P(y_i | y_<i).
DetectorScore log_likelihood_score(const LanguageModel& lm, std::span<const TokenId> text);
/// Negated mean rank.
DetectorScore mean_rank_score(const LanguageModel& lm, std::span<const TokenId> text);
/// -sum log P / sum log R.
DetectorScore lrr_score(const LanguageModel& lm, std::span<const TokenId> text);

DetectorScore log_likelihood_score(const TokenStats& stats);
DetectorScore mean_rank_score(const TokenStats& stats);
DetectorScore lrr_score(const TokenStats& stats);

/// sum log P1(y_i) / sum_i sum_v P1(v) log P2(v). Raw orientation; the
/// sign is fixed on calibration data.
DetectorScore binoculars_score(const LanguageModel& lm1, const LanguageModel& lm2,
                               std::span<const TokenId> text);

/// Per-token numerator and denominator terms, so prefixes can be scored cheaply.
struct BinocularsTerms {
  std::vector<double> log_p1;
  std::vector<double> cross;  // sum_v P1(v) log P2(v)
  bool clamped = false;
};

BinocularsTerms binoculars_terms(const LanguageModel& lm1, const LanguageModel& lm2,
                                 std::span<const TokenId> text);
DetectorScore binoculars_score(const BinocularsTerms& terms);

/// Text classifier returning a probability of machine generation.
class ExternalScorer {
 public:
  virtual ~ExternalScorer() = default;
  virtual double score(std::string_view text) const = 0;
};

/// Runs `command` through /bin/sh once and talks to it line by line:
/// writes "<byte length>\n<text>" and reads back one decimal per request.
class SubprocessScorer final : public ExternalScorer {
 public:
  explicit SubprocessScorer(std::string command);
  ~SubprocessScorer() override;
  SubprocessScorer(const SubprocessScorer&) = delete;
  SubprocessScorer& operator=(const SubprocessScorer&) = delete;

  double score(std::string_view text) const override;

 private:
  struct Process;
  std::unique_ptr<Process> proc_;
};

// Hashed n-gram logistic classifier --------------------------------------------

struct NGramClassifierConfig {
  std::size_t dim = 1u << 14;
  std::size_t max_order = 3;
  std::size_t epochs = 20;
  double lr = 0.5;
  double l2 = 1e-4;
  bool length_augment = true;
  std::uint64_t seed = 0;
};

/// Hashed counts of whitespace-token n-grams (n = 1..max_order), L2-normalized.
/// Returned as sorted (index, value) pairs.
std::vector<std::pair<std::uint32_t, double>> ngram_features(std::string_view text, std::size_t dim,
                                                             std::size_t max_order);

/// First half (rounded down, at least one) of the whitespace tokens.
std::string half_length(std::string_view text);

class NGramClassifier final : public ExternalScorer {
 public:
  NGramClassifier() = default;
  NGramClassifier(std::size_t dim, std::size_t max_order, std::vector<double> weights, double bias);

  double score(std::string_view text) const override;
  double logit(std::string_view text) const;

  std::size_t dim() const { return dim_; }
  std::size_t max_order() const { return max_order_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

  struct Metadata {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t epochs = 0;
    double lr = 0.0;
    double l2 = 0.0;
    bool length_augment = false;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
  };
  Metadata metadata;

  void save(const std::filesystem::path& path) const;
  static NGramClassifier load(const std::filesystem::path& path);
  std::string serialize() const;
  static NGramClassifier deserialize(const std::string& text);

 private:
  std::size_t dim_ = 0;
  std::size_t max_order_ = 3;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Logistic regression by shuffled per-example gradient steps. Inputs are
/// put in canonical order before the seeded shuffle, so the model does not
/// depend on the order of the given examples.
NGramClassifier train_ngram_classifier(std::span<const std::string> positives,
                                       std::span<const std::string> negatives,
                                       const NGramClassifierConfig& cfg);

}  // namespace wmlab
