#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "wmlab/error.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

void BahriConfig::validate() const {
  if (m < 1) throw ValidationError("bahri: candidate count m must be >= 1");
  if (k != 1) throw ValidationError("bahri: only the flat scheme (k = 1) is implemented");
  if (n < 2) throw ValidationError("bahri: n-gram size must be >= 2");
}

namespace {

// Inverse-CDF draws of m tokens from one distribution.
std::vector<TokenId> draw_tokens(std::span<const double> probs, std::size_t m, Rng& rng) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += std::max(probs[i], 0.0);
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw DataError("bahri: distribution has empty support");
  std::vector<TokenId> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double target = rng.unit() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    std::size_t idx = std::min<std::size_t>(it - cdf.begin(), probs.size() - 1);
    while (!(probs[idx] > 0.0) && idx > 0) --idx;  // never land on a zero-mass token
    out.push_back(static_cast<TokenId>(idx));
  }
  return out;
}

}  // namespace

BahriStep bahri_step(std::span<const double> probs, std::span<const TokenId> window,
                     const BahriConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto draws = draw_tokens(probs, cfg.m, rng);
  std::map<TokenId, std::size_t> counts;
  for (auto t : draws) ++counts[t];

  BahriStep step;
  std::map<std::uint64_t, std::size_t> seed_owners;
  Bytes msg = encode_ids(window);
  const std::size_t slot = msg.size();
  msg.resize(slot + 4);
  for (const auto& [tok, count] : counts) {
    BahriCandidate c;
    c.token = tok;
    c.count = count;
    for (int b = 0; b < 4; ++b) msg[slot + b] = static_cast<std::uint8_t>(tok >> (24 - 8 * b));
    c.seeds.push_back(prf_seed(cfg.key, msg));
    for (auto s : c.seeds) ++seed_owners[s];
    step.candidates.push_back(std::move(c));
  }
  // Seeds shared by several candidates are dropped; empty sets get a fresh seed.
  for (auto& c : step.candidates) {
    std::erase_if(c.seeds, [&](std::uint64_t s) { return seed_owners[s] > 1; });
    if (c.seeds.empty()) {
      std::uint64_t fresh;
      do {
        fresh = rng.next_u64();
      } while (seed_owners.count(fresh) != 0);
      seed_owners[fresh] = 1;
      c.seeds.push_back(fresh);
      c.fresh_seed = true;
    }
    double sum = 0.0;
    for (auto s : c.seeds) sum += seed_to_unit(s);
    c.u = irwin_hall_cdf(c.seeds.size(), sum);
  }
  double best = -std::numeric_limits<double>::infinity();
  bool have = false;
  const double m = static_cast<double>(cfg.m);
  for (const auto& c : step.candidates) {
    const double value = (m / static_cast<double>(c.count)) * std::log(c.u);
    if (!have || value > best) {
      best = value;
      step.chosen = c.token;
      have = true;
    }
  }
  return step;
}

TokenId bahri_generate_step(const LanguageModel& lm, std::span<const TokenId> prompt,
                            std::span<const TokenId> history, const BahriConfig& cfg,
                            std::uint64_t rng_seed) {
  TokenSequence context = make_context(prompt);
  context.insert(context.end(), history.begin(), history.end());
  auto dist = lm.next_distribution(std::span<const TokenId>(context));
  dist.probs[Vocabulary::kBos] = 0.0;
  Rng rng(rng_seed);
  const auto window = trailing_window(context, cfg.n - 1);
  return bahri_step(dist.probs, window, cfg, rng).chosen;
}

TokenSequence bahri_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                             const BahriConfig& cfg, const GenerationLimits& limits,
                             std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  return decode(lm, prompt, limits,
                [&](std::span<const TokenId> context, std::span<const double> probs, std::size_t) {
                  const auto window = trailing_window(context, cfg.n - 1);
                  return bahri_step(probs, window, cfg, rng).chosen;
                });
}

WatermarkScore bahri_score(std::span<const TokenId> text, const BahriConfig& cfg) {
  cfg.validate();
  if (text.size() < cfg.n) throw DataError("bahri: text shorter than the n-gram size is unscorable");
  std::set<std::uint64_t> seeds;
  for (std::size_t end = cfg.n; end <= text.size(); ++end) {
    seeds.insert(prf_seed(cfg.key, encode_ids(text.subspan(end - cfg.n, cfg.n))));
  }
  if (seeds.empty()) throw DataError("bahri: no seeds to score");
  double sum = 0.0;
  for (auto s : seeds) sum += seed_to_unit(s);
  return {irwin_hall_cdf(seeds.size(), sum), seeds.size()};
}

}  // namespace wmlab
