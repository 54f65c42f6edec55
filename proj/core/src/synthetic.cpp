#include "wmlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wmlab/error.hpp"

namespace wmlab {

namespace {

const std::vector<std::string>& markers(Register r) {
  static const std::vector<std::string> human{"honestly", "like", "anyway", "um", "so", "well"};
  static const std::vector<std::string> assistant{"additionally", "overall", "importantly", "furthermore",
                                                  "so", "well"};
  static const std::vector<std::string> other{"basically", "notably", "indeed", "also", "so", "well"};
  static const std::vector<std::string> neutral{"so", "well", "also", "overall", "like", "anyway"};
  switch (r) {
    case Register::Human: return human;
    case Register::Assistant: return assistant;
    case Register::Other: return other;
    case Register::Neutral: return neutral;
  }
  return neutral;
}

std::string pseudo_word(Rng& rng) {
  static const char* consonants = "bdfgklmnprstvz";
  static const char* vowels = "aeiou";
  const std::size_t syllables = 2 + rng.below(2);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[rng.below(14)];
    w += vowels[rng.below(5)];
  }
  return w;
}

}  // namespace

std::string to_string(Register r) {
  switch (r) {
    case Register::Human: return "human";
    case Register::Assistant: return "assistant";
    case Register::Other: return "other";
    case Register::Neutral: return "neutral";
  }
  return "?";
}

Register parse_register(const std::string& s) {
  for (auto r : {Register::Human, Register::Assistant, Register::Other, Register::Neutral}) {
    if (to_string(r) == s) return r;
  }
  throw ValidationError("unknown register '" + s + "'");
}

DeskWorld::DeskWorld(WorldConfig cfg) : cfg_(cfg) {
  if (cfg_.topics < 1 || cfg_.words_per_topic < 2 || cfg_.max_branch < 1) {
    throw ValidationError("world needs >= 1 topic, >= 2 words per topic and max_branch >= 1");
  }
  Rng rng(derive_seed(cfg_.seed, "world"));
  function_words_ = {"the", "a", "of", "and", "to", "in", "with", "for"};
  std::set<std::string> taken(function_words_.begin(), function_words_.end());
  for (auto r : {Register::Human, Register::Assistant, Register::Other, Register::Neutral}) {
    for (const auto& m : markers(r)) taken.insert(m);
  }
  words_.resize(cfg_.topics);
  chain_.resize(cfg_.topics);
  for (std::size_t t = 0; t < cfg_.topics; ++t) {
    while (words_[t].size() < cfg_.words_per_topic) {
      auto w = pseudo_word(rng);
      if (taken.insert(w).second) words_[t].push_back(std::move(w));
    }
    const double open = openness(t);
    const auto branch = std::min<std::size_t>(
        cfg_.words_per_topic, 1 + static_cast<std::size_t>(std::lround(open * open * static_cast<double>(cfg_.max_branch - 1))));
    chain_[t].resize(cfg_.words_per_topic);
    for (std::size_t w = 0; w < cfg_.words_per_topic; ++w) {
      std::vector<std::size_t> pool(cfg_.words_per_topic);
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
      for (std::size_t i = 0; i < branch; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      auto& node = chain_[t][w];
      node.next.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(branch));
      for (std::size_t r = 0; r < branch; ++r) node.weight.push_back(1.0 / static_cast<double>(r + 1));
    }
  }
}

double DeskWorld::openness(std::size_t topic) const {
  if (cfg_.topics == 1) return 1.0;
  return static_cast<double>(topic) / static_cast<double>(cfg_.topics - 1);
}

std::size_t DeskWorld::step(Register reg, std::size_t topic, std::size_t from, Rng& rng) const {
  if (reg == Register::Human && rng.unit() < cfg_.human_drift) return rng.below(cfg_.words_per_topic);
  const auto& node = chain_[topic][from];
  return node.next[rng.categorical(node.weight)];
}

std::string DeskWorld::walk(Register reg, std::size_t topic, std::size_t start, std::size_t words,
                            bool leading_space, Rng& rng) const {
  // Periods and function words only follow content words, and markers only
  // follow periods, so any three consecutive tokens include a content word.
  const double open = openness(topic);
  const double sentence_end = 0.03 + 0.07 * open;
  const double function_rate = 0.25 * open;
  const auto& mk = markers(reg);
  enum class Prev { Content, Period, Other } prev = Prev::Other;
  std::string out;
  auto emit = [&](const std::string& w) {
    if (!out.empty() || leading_space) out += ' ';
    out += w;
  };
  std::size_t cur = start;
  for (std::size_t n = 0; n < words; ++n) {
    if (prev == Prev::Content) {
      const double u = rng.unit();
      if (u < sentence_end) {
        emit(".");
        prev = Prev::Period;
        continue;
      }
      if (u < sentence_end + function_rate) {
        emit(function_words_[rng.below(function_words_.size())]);
        prev = Prev::Other;
        continue;
      }
    } else if (prev == Prev::Period && rng.unit() < cfg_.marker_rate) {
      emit(mk[rng.below(mk.size())]);
      prev = Prev::Other;
      continue;
    }
    cur = step(reg, topic, cur, rng);
    emit(words_[topic][cur]);
    prev = Prev::Content;
  }
  return out;
}

std::string DeskWorld::document(Register reg, std::size_t topic, std::size_t words, Rng& rng) const {
  if (topic >= cfg_.topics) throw ValidationError("topic index out of range");
  return walk(reg, topic, rng.below(cfg_.words_per_topic), words, false, rng);
}

Prompt DeskWorld::prompt(const std::string& id, const std::string& lead, std::size_t topic, Rng& rng) const {
  if (topic >= cfg_.topics) throw ValidationError("topic index out of range");
  Prompt p;
  p.id = id;
  p.topic = topic;
  p.text = lead;
  std::size_t cur = rng.below(cfg_.words_per_topic);
  const std::size_t n = 3 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    p.text += ' ';
    p.text += words_[topic][cur];
    if (i + 1 < n) cur = chain_[topic][cur].next[rng.categorical(chain_[topic][cur].weight)];
  }
  return p;
}

std::string DeskWorld::respond(Register reg, const Prompt& p, std::size_t words, Rng& rng) const {
  const auto last = p.text.rfind(' ');
  const std::string tail = last == std::string::npos ? p.text : p.text.substr(last + 1);
  const auto& tw = words_.at(p.topic);
  const auto it = std::find(tw.begin(), tw.end(), tail);
  const std::size_t start = it == tw.end() ? rng.below(tw.size()) : static_cast<std::size_t>(it - tw.begin());
  return walk(reg, p.topic, start, words, true, rng);
}

}  // namespace wmlab
