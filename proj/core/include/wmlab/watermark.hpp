#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmlab/language_model.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

/// Sequence-level watermark statistic; higher means more likely watermarked.
struct WatermarkScore {
  double value = 0.0;
  std::size_t effective_length = 0;  // tokens, unique n-grams or unique seeds scored
};

/// The n-1 tokens preceding position `end` of `context`, left-padded with BOS.
std::vector<TokenId> trailing_window(std::span<const TokenId> context, std::size_t width);

// Aaronson -------------------------------------------------------------------

struct AaronsonConfig {
  std::size_t n = 4;
  WatermarkKey key = WatermarkKey::from_integer(0);
  bool dedup_ngrams = false;  // off: every window is scored

  void validate() const;
};

/// argmax_i u_i^(1/p_i) over the support, with u_i = prf(key, window || i).
/// Evaluated as log(u_i)/p_i; ties go to the lower token id.
TokenId aaronson_select(std::span<const double> probs, std::span<const TokenId> window,
                        const WatermarkKey& key);

TokenSequence aaronson_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                const AaronsonConfig& cfg, const GenerationLimits& limits);

struct AaronsonScore {
  double sum = 0.0;           // s_A = -sum log(1 - R_i)
  double length_aware = 0.0;  // s_AC = Gamma(T, 1) CDF at s_A
  std::size_t windows = 0;    // T

  WatermarkScore score() const { return {length_aware, windows}; }
};

/// Throws DataError when the text is shorter than n.
AaronsonScore aaronson_score(std::span<const TokenId> text, const AaronsonConfig& cfg);

// Kirchenbauer ---------------------------------------------------------------

struct KirchenbauerConfig {
  std::size_t n = 4;
  double gamma = 0.25;
  double delta = 2.0;
  WatermarkKey key = WatermarkKey::from_integer(0);

  void validate() const;
};

/// Token is green iff prf(key, context || token) < gamma, with the context
/// being the n-1 preceding tokens.
bool kirchenbauer_is_green(std::span<const TokenId> context, TokenId token,
                           const KirchenbauerConfig& cfg);

/// Adds delta to the log-probabilities of green support tokens and renormalizes.
std::vector<double> kirchenbauer_bias(std::span<const double> probs, std::span<const TokenId> window,
                                      const KirchenbauerConfig& cfg);

TokenSequence kirchenbauer_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                    const KirchenbauerConfig& cfg, const GenerationLimits& limits,
                                    std::uint64_t rng_seed);

struct KirchenbauerScore {
  double z = 0.0;
  std::size_t unique_ngrams = 0;  // T
  std::size_t green = 0;          // T_g

  WatermarkScore score() const { return {z, unique_ngrams}; }
};

/// Skips n-grams already seen in the text. Throws DataError when no n-gram remains.
KirchenbauerScore kirchenbauer_score(std::span<const TokenId> text, const KirchenbauerConfig& cfg);

// Bahri (flat scheme, k = 1) -----------------------------------------------------

struct BahriConfig {
  std::size_t m = 1024;
  std::size_t k = 1;
  std::size_t n = 4;
  WatermarkKey key = WatermarkKey::from_integer(0);

  void validate() const;
};

struct BahriCandidate {
  TokenId token = 0;
  std::size_t count = 0;              // c_i
  std::vector<std::uint64_t> seeds;   // S_i after cross-candidate de-duplication
  bool fresh_seed = false;            // S_i was empty and received a random unseen seed
  double u = 0.0;                     // F_{|S_i|}(sum of F[s])
};

struct BahriStep {
  std::vector<BahriCandidate> candidates;  // sorted by token id
  TokenId chosen = 0;
};

/// One flat-scheme step: m iid draws from probs, unique candidates, seeds
/// h(K | window || candidate), selection argmax (m / c_i) log u_i.
BahriStep bahri_step(std::span<const double> probs, std::span<const TokenId> window,
                     const BahriConfig& cfg, Rng& rng);

TokenId bahri_generate_step(const LanguageModel& lm, std::span<const TokenId> prompt,
                            std::span<const TokenId> history, const BahriConfig& cfg,
                            std::uint64_t rng_seed);

TokenSequence bahri_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                             const BahriConfig& cfg, const GenerationLimits& limits,
                             std::uint64_t rng_seed);

/// s_B over the de-duplicated seeds of all n-grams. Throws DataError when empty.
WatermarkScore bahri_score(std::span<const TokenId> text, const BahriConfig& cfg);

// Kuditipudi -------------------------------------------------------------------

struct KuditipudiConfig {
  std::vector<std::uint64_t> seed_list;
  std::size_t n_ref = 5000;
  double edit_cost = 1.0;

  /// Seed list of the given length derived from a secret key.
  static KuditipudiConfig from_key(const WatermarkKey& key, std::size_t list_length = 256);
  void validate() const;
  /// Hex SHA-256 of the seed list (8-byte big-endian words).
  std::string seed_list_digest() const;
};

/// Per-token draw for one list seed: prf(be64(seed), be32(token)).
double kuditipudi_uniform(std::uint64_t seed_value, TokenId token);

/// Aaronson's selection rule driven by a list seed instead of an n-gram.
TokenId kuditipudi_select(std::span<const double> probs, std::uint64_t seed_value);

TokenSequence kuditipudi_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                  const KuditipudiConfig& cfg, const GenerationLimits& limits,
                                  std::uint64_t start_rng);

/// Levenshtein DP between text and the seed sequence starting at `shift`
/// (same length as the text). Substitution cost log(1 - u), insertion and
/// deletion cost edit_cost. Lower is more watermark-like.
double kuditipudi_alignment_cost(std::span<const TokenId> text, const KuditipudiConfig& cfg,
                                 std::size_t shift);

/// Minimum alignment cost over all circular shifts of the seed list.
double kuditipudi_min_cost(std::span<const TokenId> text, const KuditipudiConfig& cfg);

/// Null alignment costs per text length for one seed list.
class KuditipudiReferences {
 public:
  KuditipudiReferences() = default;
  KuditipudiReferences(std::string seed_list_digest, double edit_cost)
      : digest_(std::move(seed_list_digest)), edit_cost_(edit_cost) {}

  const std::string& seed_list_digest() const { return digest_; }
  double edit_cost() const { return edit_cost_; }
  void set(std::size_t length, std::vector<double> costs);
  bool has(std::size_t length) const { return tables_.count(length) != 0; }
  const std::vector<double>& costs(std::size_t length) const;
  std::vector<std::size_t> lengths() const;
  /// Largest stored length <= text_length, if any.
  std::optional<std::size_t> resolve_length(std::size_t text_length) const;

  void save(const std::filesystem::path& path) const;
  static KuditipudiReferences load(const std::filesystem::path& path);
  std::string serialize() const;
  static KuditipudiReferences deserialize(const std::string& text);

 private:
  std::string digest_;
  double edit_cost_ = 1.0;
  std::map<std::size_t, std::vector<double>> tables_;  // sorted ascending costs
};

/// n_ref null snippets of each length, drawn deterministically from the corpus.
/// Throws DataError when a length has fewer than n_ref distinct snippets.
KuditipudiReferences kuditipudi_precompute_references(const KuditipudiConfig& cfg,
                                                      std::span<const TokenSequence> null_corpus,
                                                      std::span<const std::size_t> lengths,
                                                      std::uint64_t rng_seed);

struct KuditipudiScore {
  double min_cost = 0.0;
  double p_value = 1.0;  // (1 + #{ref <= observed}) / (n_ref + 1)
  std::size_t scored_length = 0;

  WatermarkScore score() const { return {1.0 - p_value, scored_length}; }
};

/// Truncates the text to the largest reference length it covers. Throws
/// DataError when no usable table exists or the seed list does not match.
KuditipudiScore kuditipudi_score(std::span<const TokenId> text, const KuditipudiConfig& cfg,
                                 const KuditipudiReferences& references);

}  // namespace wmlab
