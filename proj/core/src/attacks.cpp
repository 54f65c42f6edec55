#include "wmlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "child_process.hpp"
#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

std::string to_string(AttackKind k) { return k == AttackKind::TokenReplace ? "token_replace" : "paraphrase"; }

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "token_replace") return AttackKind::TokenReplace;
  if (s == "paraphrase") return AttackKind::Paraphrase;
  throw ValidationError("unknown attack kind '" + s + "' (expected token_replace or paraphrase)");
}

void AttackConfig::validate() const {
  if (!(p_percent >= 0.0 && p_percent <= 100.0)) throw ValidationError("attack p_percent must lie in [0, 100]");
}

TokenSequence random_token_replacement(std::span<const TokenId> tokens, double p_percent,
                                       std::size_t vocab_size, std::uint64_t rng_seed,
                                       TokenId first_candidate) {
  if (!(p_percent >= 0.0 && p_percent <= 100.0)) throw ValidationError("attack p_percent must lie in [0, 100]");
  if (vocab_size < static_cast<std::size_t>(first_candidate) + 2) {
    throw ValidationError("token replacement needs at least two candidate tokens");
  }
  TokenSequence out(tokens.begin(), tokens.end());
  const auto count = static_cast<std::size_t>(std::floor(p_percent * static_cast<double>(out.size()) / 100.0 + 1e-9));
  Rng rng(rng_seed);
  std::vector<std::size_t> positions(out.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  const std::size_t candidates = vocab_size - first_candidate;
  for (std::size_t k = 0; k < count; ++k) {
    std::swap(positions[k], positions[k + rng.below(positions.size() - k)]);
    const TokenId current = out[positions[k]];
    const bool current_is_candidate = current >= first_candidate && current < vocab_size;
    auto pick = static_cast<TokenId>(first_candidate + rng.below(candidates - (current_is_candidate ? 1 : 0)));
    if (current_is_candidate && pick >= current) ++pick;
    out[positions[k]] = pick;
  }
  return out;
}

std::string random_token_replacement(std::string_view text, const Vocabulary& vocab, double p_percent,
                                     std::uint64_t rng_seed) {
  const auto ids = tokenize(text, vocab);
  const TokenId first = vocab.has_byte_fallback() ? Vocabulary::kFirstByte : vocab.first_piece();
  return detokenize(random_token_replacement(ids, p_percent, vocab.size(), rng_seed, first), vocab);
}

ResampleParaphraser::ResampleParaphraser(const LanguageModel& lm, double keep_fraction)
    : lm_(lm), keep_(keep_fraction) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw ValidationError("paraphrase keep fraction must lie in [0, 1]");
  }
}

std::optional<std::string> ResampleParaphraser::rewrite(std::string_view text, std::uint64_t seed) const {
  const auto& vocab = lm_.vocabulary();
  const auto ids = tokenize(text, vocab);
  Rng rng(seed);
  TokenSequence context{Vocabulary::kBos};
  TokenSequence out;
  out.reserve(ids.size());
  for (TokenId y : ids) {
    TokenId next = y;
    if (rng.unit() >= keep_) {
      auto dist = lm_.next_distribution(std::span<const TokenId>(context));
      dist.probs[Vocabulary::kBos] = 0.0;
      dist.probs[Vocabulary::kEos] = 0.0;
      next = static_cast<TokenId>(rng.categorical(dist.probs));
    }
    out.push_back(next);
    context.push_back(next);
  }
  return detokenize(out, vocab);
}

struct SubprocessParaphraser::Process {
  explicit Process(const std::string& cmd) : child(cmd) {}
  detail::ChildProcess child;
};

SubprocessParaphraser::SubprocessParaphraser(std::string command)
    : proc_(std::make_unique<Process>(command)) {}

SubprocessParaphraser::~SubprocessParaphraser() = default;

std::optional<std::string> SubprocessParaphraser::rewrite(std::string_view text, std::uint64_t) const {
  proc_->child.send_framed(text);
  const std::string header = proc_->child.read_line();
  if (header == "-1") return std::nullopt;
  char* end = nullptr;
  const long long n = std::strtoll(header.c_str(), &end, 10);
  if (header.empty() || *end != '\0' || n < 0) {
    throw DataError("paraphraser sent a malformed length header: '" + header + "'");
  }
  return proc_->child.read_exact(static_cast<std::size_t>(n));
}

std::string AttackManifest::serialize() const {
  nlohmann::ordered_json j;
  j["format"] = "wmlab-attack";
  j["version"] = 1;
  j["kind"] = to_string(config.kind);
  j["p_percent"] = config.p_percent;
  j["seed"] = config.rng_seed;
  j["calibration_seed"] = calibration_seed;
  j["test_seed"] = test_seed;
  j["corrupted"] = corrupted;
  j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

Dataset apply_attack_protocol(const Dataset& dataset, const AttackConfig& cfg, const Vocabulary& vocab,
                              const Paraphraser* paraphraser, AttackManifest* manifest) {
  cfg.validate();
  if (cfg.kind == AttackKind::Paraphrase && paraphraser == nullptr) {
    throw ValidationError("paraphrase attack needs a paraphraser");
  }
  AttackManifest local;
  AttackManifest& m = manifest ? *manifest : local;
  m = AttackManifest{};
  m.config = cfg;
  m.calibration_seed = derive_seed(cfg.rng_seed, "attack", "calibration");
  m.test_seed = derive_seed(cfg.rng_seed, "attack", "test");
  Dataset out;
  out.reserve(dataset.size());
  for (const auto& r : dataset) {
    if (r.split != "calibration" && r.split != "test") {
      throw DataError("record " + r.id + " has no split tag; attacks need calibration/test tags");
    }
    if (!(r.positive && r.watermarked())) {
      out.push_back(r);
      continue;
    }
    const std::uint64_t split_seed = r.split == "test" ? m.test_seed : m.calibration_seed;
    const std::uint64_t seed = derive_seed(split_seed, to_string(cfg.kind), r.id);
    DatasetRecord a = r;
    if (cfg.kind == AttackKind::TokenReplace) {
      a.response = random_token_replacement(r.response, vocab, cfg.p_percent, seed);
    } else {
      auto rewritten = paraphraser->rewrite(r.response, seed);
      if (!rewritten) {
        m.skipped.push_back(r.id);
        continue;
      }
      a.response = std::move(*rewritten);
    }
    a.attack = AttackProvenance{to_string(cfg.kind), cfg.p_percent, seed};
    m.corrupted.push_back(r.id);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace wmlab
