#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmlab/dataset.hpp"
#include "wmlab/language_model.hpp"

namespace wmlab {

enum class AttackKind { TokenReplace, Paraphrase };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct AttackConfig {
  AttackKind kind = AttackKind::TokenReplace;
  double p_percent = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Replaces floor(p T / 100) distinct positions, each by a token drawn
/// uniformly from ids [first_candidate, vocab_size) other than the current one.
TokenSequence random_token_replacement(std::span<const TokenId> tokens, double p_percent,
                                       std::size_t vocab_size, std::uint64_t rng_seed,
                                       TokenId first_candidate = Vocabulary::kFirstByte);

/// Text form: tokenize, replace (never BOS or EOS), detokenize.
std::string random_token_replacement(std::string_view text, const Vocabulary& vocab,
                                     double p_percent, std::uint64_t rng_seed);

class Paraphraser {
 public:
  virtual ~Paraphraser() = default;
  /// Rewritten text, or nothing when the paraphraser declines.
  virtual std::optional<std::string> rewrite(std::string_view text, std::uint64_t seed) const = 0;
};

/// Keeps each token with probability keep_fraction and resamples the others
/// from the model given the rewritten prefix.
class ResampleParaphraser final : public Paraphraser {
 public:
  ResampleParaphraser(const LanguageModel& lm, double keep_fraction = 0.5);
  std::optional<std::string> rewrite(std::string_view text, std::uint64_t seed) const override;

 private:
  const LanguageModel& lm_;
  double keep_;
};

/// Line protocol over a persistent /bin/sh child: writes "<bytes>\n<text>",
/// reads "<bytes>\n<text>" back, or "-1\n" when the rewrite is absent.
class SubprocessParaphraser final : public Paraphraser {
 public:
  explicit SubprocessParaphraser(std::string command);
  ~SubprocessParaphraser() override;
  SubprocessParaphraser(const SubprocessParaphraser&) = delete;
  SubprocessParaphraser& operator=(const SubprocessParaphraser&) = delete;
  std::optional<std::string> rewrite(std::string_view text, std::uint64_t seed) const override;

 private:
  struct Process;
  std::unique_ptr<Process> proc_;
};

struct AttackManifest {
  AttackConfig config;
  std::uint64_t calibration_seed = 0;
  std::uint64_t test_seed = 0;
  std::vector<std::string> corrupted;  // record ids
  std::vector<std::string> skipped;    // paraphrase declined; record dropped

  std::string serialize() const;
};

/// Split seed = derive_seed(cfg seed, "attack", split); record seed =
/// derive_seed(split seed, kind, record id). Only watermarked positives are
/// rewritten; everything else is copied unchanged. Records whose paraphrase
/// is absent are dropped; evaluation pairs by prompt id, so the matching
/// negatives fall out of that scheme's pairing.
Dataset apply_attack_protocol(const Dataset& dataset, const AttackConfig& cfg, const Vocabulary& vocab,
                              const Paraphraser* paraphraser, AttackManifest* manifest = nullptr);

}  // namespace wmlab
