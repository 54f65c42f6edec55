#include "wmlab/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

double next_token_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

EntropyEstimate entropy_from_samples(const LanguageModel& lm, std::span<const TokenId> prompt,
                                     std::span<const TokenSequence> samples, std::size_t horizon) {
  if (horizon == 0) throw ValidationError("entropy horizon must be >= 1");
  if (samples.empty()) throw ValidationError("entropy estimate needs at least one sample");
  EntropyEstimate est;
  est.horizon = horizon;
  est.n_samples = samples.size();
  est.per_position.assign(horizon, 0.0);
  for (const auto& y : samples) {
    TokenSequence context = make_context(prompt);
    // Position i uses the partial response y_{<i}; the last usable one is i = |y|.
    const std::size_t usable = std::min(horizon, y.size() + 1);
    if (y.size() < horizon) ++est.short_samples;
    for (std::size_t i = 0; i < usable && i < horizon; ++i) {
      const auto dist = lm.next_distribution(std::span<const TokenId>(context));
      est.per_position[i] += next_token_entropy(dist.probs);
      if (i < y.size()) context.push_back(y[i]);
    }
  }
  const double n = static_cast<double>(samples.size());
  for (double& h : est.per_position) {
    h /= n;
    est.total += h;
  }
  return est;
}

EntropyEstimate estimate_response_entropy(const LanguageModel& lm, std::span<const TokenId> prompt,
                                          std::size_t n_samples, std::size_t horizon,
                                          std::uint64_t rng_seed) {
  if (n_samples == 0) throw ValidationError("entropy estimate needs n_samples >= 1");
  if (horizon == 0) throw ValidationError("entropy horizon must be >= 1");
  std::vector<TokenSequence> samples;
  samples.reserve(n_samples);
  Rng seeds(rng_seed);
  for (std::size_t j = 0; j < n_samples; ++j) {
    samples.push_back(sample(lm, prompt, {horizon, horizon}, seeds.next_u64()));
  }
  return entropy_from_samples(lm, prompt, samples, horizon);
}

std::size_t EntropyBuckets::bucket_of(const std::string& prompt_id) const {
  auto it = std::lower_bound(assignment.begin(), assignment.end(), prompt_id,
                             [](const auto& e, const std::string& id) { return e.first < id; });
  if (it == assignment.end() || it->first != prompt_id) {
    throw DataError("prompt '" + prompt_id + "' has no entropy bucket");
  }
  return it->second;
}

EntropyBuckets bucket_by_entropy(std::span<const PromptEntropy> estimates) {
  const std::size_t n = estimates.size();
  if (n < EntropyBuckets::kBuckets) {
    throw DataError("entropy bucketing needs at least 5 prompts, got " + std::to_string(n));
  }
  std::vector<PromptEntropy> sorted(estimates.begin(), estimates.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.entropy != b.entropy ? a.entropy < b.entropy : a.prompt_id < b.prompt_id;
  });
  EntropyBuckets out;
  const std::size_t base = n / EntropyBuckets::kBuckets;
  const std::size_t extra = n % EntropyBuckets::kBuckets;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < EntropyBuckets::kBuckets; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++pos) out.assignment.emplace_back(sorted[pos].prompt_id, b);
    out.upper.push_back(sorted[pos - 1].entropy);
  }
  std::sort(out.assignment.begin(), out.assignment.end());
  return out;
}

}  // namespace wmlab
