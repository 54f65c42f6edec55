#include <cmath>
#include <set>

#include "wmlab/error.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

void KirchenbauerConfig::validate() const {
  if (n < 2) throw ValidationError("kirchenbauer: n-gram size must be >= 2");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("kirchenbauer: gamma must lie in [0, 1]");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("kirchenbauer: delta must be finite and >= 0");
}

bool kirchenbauer_is_green(std::span<const TokenId> context, TokenId token,
                           const KirchenbauerConfig& cfg) {
  Bytes msg = encode_ids(context);
  append_be32(msg, token);
  return prf_uniform(cfg.key, msg) < cfg.gamma;
}

std::vector<double> kirchenbauer_bias(std::span<const double> probs, std::span<const TokenId> window,
                                      const KirchenbauerConfig& cfg) {
  std::vector<double> out(probs.begin(), probs.end());
  if (cfg.delta == 0.0) return out;
  const double boost = std::exp(cfg.delta);
  Bytes msg = encode_ids(window);
  const std::size_t slot = msg.size();
  msg.resize(slot + 4);
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) continue;
    const auto id = static_cast<TokenId>(i);
    for (int b = 0; b < 4; ++b) msg[slot + b] = static_cast<std::uint8_t>(id >> (24 - 8 * b));
    if (prf_uniform(cfg.key, msg) < cfg.gamma) out[i] *= boost;
    total += out[i];
  }
  if (!(total > 0.0)) throw DataError("kirchenbauer: distribution has empty support");
  for (double& p : out) p /= total;
  return out;
}

TokenSequence kirchenbauer_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                    const KirchenbauerConfig& cfg, const GenerationLimits& limits,
                                    std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  return decode(lm, prompt, limits,
                [&](std::span<const TokenId> context, std::span<const double> probs, std::size_t) {
                  const auto window = trailing_window(context, cfg.n - 1);
                  const auto biased = kirchenbauer_bias(probs, window, cfg);
                  return static_cast<TokenId>(rng.categorical(biased));
                });
}

KirchenbauerScore kirchenbauer_score(std::span<const TokenId> text, const KirchenbauerConfig& cfg) {
  cfg.validate();
  if (text.size() < cfg.n) throw DataError("kirchenbauer: text shorter than the n-gram size is unscorable");
  KirchenbauerScore out;
  std::set<Bytes> seen;
  for (std::size_t end = cfg.n; end <= text.size(); ++end) {
    Bytes gram = encode_ids(text.subspan(end - cfg.n, cfg.n));
    if (!seen.insert(gram).second) continue;
    ++out.unique_ngrams;
    if (prf_uniform(cfg.key, gram) < cfg.gamma) ++out.green;
  }
  if (out.unique_ngrams == 0) throw DataError("kirchenbauer: no n-grams to score");
  const double t = static_cast<double>(out.unique_ngrams);
  const double var = t * cfg.gamma * (1.0 - cfg.gamma);
  if (!(var > 0.0)) throw ValidationError("kirchenbauer: z-score undefined for gamma in {0, 1}");
  out.z = (static_cast<double>(out.green) - cfg.gamma * t) / std::sqrt(var);
  return out;
}

}  // namespace wmlab
