#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmlab/randomness.hpp"

namespace wmlab {

/// Writing style of a synthetic text source.
enum class Register { Human, Assistant, Other, Neutral };

std::string to_string(Register r);
Register parse_register(const std::string& s);

struct WorldConfig {
  std::size_t topics = 20;
  std::size_t words_per_topic = 30;
  std::size_t max_branch = 16;       // successors per word in the most open topic
  double human_drift = 0.05;         // chance a human jumps to a random topic word
  double marker_rate = 0.4;          // chance a sentence opens with a register marker
  std::uint64_t seed = 1;
};

struct Prompt {
  std::string id;
  std::size_t topic = 0;
  std::string text;
};

/// Toy text world: every topic owns a pseudo-word vocabulary and a first-order
/// Markov chain whose branching grows with the topic's openness level, so
/// topics span low to high next-word entropy. Registers add their own
/// sentence-opening markers.
class DeskWorld {
 public:
  explicit DeskWorld(WorldConfig cfg);

  const WorldConfig& config() const { return cfg_; }
  /// Openness in [0, 1]; topic 0 is the most predictable.
  double openness(std::size_t topic) const;
  const std::vector<std::string>& topic_words(std::size_t topic) const { return words_.at(topic); }

  /// One document of about `words` words (one per line when written out).
  std::string document(Register reg, std::size_t topic, std::size_t words, Rng& rng) const;

  /// Question-style prompt ending in a walk of topic words.
  Prompt prompt(const std::string& id, const std::string& lead, std::size_t topic, Rng& rng) const;

  /// Continuation of the prompt's topic chain from its last word.
  std::string respond(Register reg, const Prompt& p, std::size_t words, Rng& rng) const;

 private:
  struct Word {
    std::vector<std::size_t> next;
    std::vector<double> weight;
  };
  std::string walk(Register reg, std::size_t topic, std::size_t start, std::size_t words,
                   bool leading_space, Rng& rng) const;
  std::size_t step(Register reg, std::size_t topic, std::size_t from, Rng& rng) const;

  WorldConfig cfg_;
  std::vector<std::vector<std::string>> words_;
  std::vector<std::vector<Word>> chain_;
  std::vector<std::string> function_words_;
};

}  // namespace wmlab
