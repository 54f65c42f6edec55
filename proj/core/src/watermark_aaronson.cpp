#include <cmath>
#include <limits>
#include <set>

#include "wmlab/error.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

namespace {

// -log(1 - r) with r clamped away from 1.
double neg_log_one_minus(double r) { return -std::log1p(-std::min(r, 1.0 - 1e-15)); }

}  // namespace

std::vector<TokenId> trailing_window(std::span<const TokenId> context, std::size_t width) {
  std::vector<TokenId> window(width, Vocabulary::kBos);
  const std::size_t take = std::min(width, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            window.end() - static_cast<std::ptrdiff_t>(take));
  return window;
}

void AaronsonConfig::validate() const {
  if (n < 2) throw ValidationError("aaronson: n-gram size must be >= 2");
}

TokenId aaronson_select(std::span<const double> probs, std::span<const TokenId> window,
                        const WatermarkKey& key) {
  Bytes msg = encode_ids(window);
  const std::size_t slot = msg.size();
  msg.resize(slot + 4);
  double best = -std::numeric_limits<double>::infinity();
  std::optional<TokenId> chosen;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) continue;
    const auto id = static_cast<TokenId>(i);
    for (int b = 0; b < 4; ++b) msg[slot + b] = static_cast<std::uint8_t>(id >> (24 - 8 * b));
    const double u = seed_to_unit(prf_seed_raw(key.bytes(), msg));
    const double value = std::log(u) / probs[i];
    if (!chosen || value > best) {
      best = value;
      chosen = id;
    }
  }
  if (!chosen) throw DataError("aaronson: distribution has empty support");
  return *chosen;
}

TokenSequence aaronson_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                const AaronsonConfig& cfg, const GenerationLimits& limits) {
  cfg.validate();
  return decode(lm, prompt, limits,
                [&](std::span<const TokenId> context, std::span<const double> probs, std::size_t) {
                  const auto window = trailing_window(context, cfg.n - 1);
                  return aaronson_select(probs, window, cfg.key);
                });
}

AaronsonScore aaronson_score(std::span<const TokenId> text, const AaronsonConfig& cfg) {
  cfg.validate();
  if (text.size() < cfg.n) throw DataError("aaronson: text shorter than the n-gram size is unscorable");
  AaronsonScore out;
  std::set<Bytes> seen;
  for (std::size_t end = cfg.n; end <= text.size(); ++end) {
    Bytes gram = encode_ids(text.subspan(end - cfg.n, cfg.n));
    if (cfg.dedup_ngrams && !seen.insert(gram).second) continue;
    out.sum += neg_log_one_minus(prf_uniform(cfg.key, gram));
    ++out.windows;
  }
  out.length_aware = gamma_cdf(out.windows, out.sum);
  return out;
}

}  // namespace wmlab
