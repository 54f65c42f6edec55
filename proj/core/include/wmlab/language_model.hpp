#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmlab/tokenizer.hpp"

namespace wmlab {

/// Next-token probabilities over the whole vocabulary.
struct NextTokenDistribution {
  std::vector<double> probs;

  /// Throws DataError unless entries are finite, non-negative and sum to 1 +- tol.
  void validate(double tol = 1e-9) const;
};

/// Autoregressive model. `context` always starts with BOS followed by the
/// prompt ids and the partial response; an empty prompt is just [BOS].
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual NextTokenDistribution next_distribution(std::span<const TokenId> context) const = 0;
  virtual std::size_t context_limit() const { return 4096; }

  NextTokenDistribution next_distribution(std::span<const TokenId> prompt,
                                          std::span<const TokenId> partial) const;
};

/// [BOS] + prompt.
TokenSequence make_context(std::span<const TokenId> prompt);

/// Fixed distribution at every step.
class MemorylessModel final : public LanguageModel {
 public:
  MemorylessModel(Vocabulary vocab, std::vector<double> probs);
  static MemorylessModel uniform(Vocabulary vocab);

  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next_distribution(std::span<const TokenId>) const override {
    return dist_;
  }

 private:
  Vocabulary vocab_;
  NextTokenDistribution dist_;
};

/// Backoff n-gram model with add-alpha smoothing:
///   P(t | ctx) = (count(ctx, t) + alpha) / (count(ctx) + alpha * V)
/// using the longest context of at most order-1 tokens that was seen in
/// training, down to the unigram distribution.
class NGramModel final : public LanguageModel {
 public:
  struct Successors {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> next;  // sorted by token id
  };

  NGramModel(Vocabulary vocab, std::size_t order, double alpha, std::size_t context_limit = 4096);

  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next_distribution(std::span<const TokenId> context) const override;
  std::size_t context_limit() const override { return context_limit_; }

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }

  /// Counts one training sequence (BOS/EOS are added here).
  void add_sequence(std::span<const TokenId> ids);
  /// Sorts successor lists; called once after the last add_sequence.
  void finalize();

  /// Length of the context actually used for this history (0 = unigram).
  std::size_t backoff_length(std::span<const TokenId> context) const;

  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);
  std::string serialize() const;
  static NGramModel deserialize(const std::string& text);

 private:
  const Successors* find(std::span<const TokenId> ctx) const;

  Vocabulary vocab_;
  std::size_t order_;
  double alpha_;
  std::size_t context_limit_;
  // Keyed by the 4-byte big-endian encoding of the context ids.
  std::unordered_map<std::string, Successors> table_;
};

NGramModel train_ngram_lm(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                          std::size_t order, double alpha);

struct GenerationLimits {
  std::size_t min_new = 50;
  std::size_t max_new = 250;
};

/// Chooses the next token from an already masked and renormalized distribution.
/// `context` is BOS + prompt + response so far; `step` counts response tokens.
using TokenSelector = std::function<TokenId(std::span<const TokenId> context,
                                            std::span<const double> probs, std::size_t step)>;

/// Shared decoding loop. BOS is never emitted; EOS is masked for the first
/// min_new steps and ends generation afterwards; generation stops at max_new.
TokenSequence decode(const LanguageModel& lm, std::span<const TokenId> prompt,
                     const GenerationLimits& limits, const TokenSelector& select);

/// Temperature-1 ancestral sampling.
TokenSequence sample(const LanguageModel& lm, std::span<const TokenId> prompt,
                     const GenerationLimits& limits, std::uint64_t rng_seed);

}  // namespace wmlab
