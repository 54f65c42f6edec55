#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wmlab/language_model.hpp"

namespace wmlab {

/// -sum p log p in nats, with 0 log 0 = 0.
double next_token_entropy(std::span<const double> probs);

struct EntropyEstimate {
  std::vector<double> per_position;  // H_i estimates, nats
  double total = 0.0;                // sum over the horizon
  std::size_t n_samples = 0;
  std::size_t horizon = 0;
  std::size_t short_samples = 0;  // samples that ended before the horizon
};

/// Averages next-token entropies along the given responses (sample reuse).
/// Positions past a response's end contribute zero and count as short.
EntropyEstimate entropy_from_samples(const LanguageModel& lm, std::span<const TokenId> prompt,
                                     std::span<const TokenSequence> samples, std::size_t horizon);

/// Draws n_samples plain responses of exactly `horizon` tokens and averages
/// the model's next-token entropies along them.
EntropyEstimate estimate_response_entropy(const LanguageModel& lm, std::span<const TokenId> prompt,
                                          std::size_t n_samples, std::size_t horizon,
                                          std::uint64_t rng_seed);

struct PromptEntropy {
  std::string prompt_id;
  double entropy = 0.0;
};

struct EntropyBuckets {
  static constexpr std::size_t kBuckets = 5;
  std::vector<double> upper;                    // largest entropy in each bucket
  std::vector<std::pair<std::string, std::size_t>> assignment;  // prompt id -> bucket, sorted by id

  std::size_t bucket_of(const std::string& prompt_id) const;
};

/// Sorts by (entropy, prompt id) and cuts into five groups whose sizes differ
/// by at most one, larger groups first. Throws DataError on fewer than 5 prompts.
EntropyBuckets bucket_by_entropy(std::span<const PromptEntropy> estimates);

}  // namespace wmlab
