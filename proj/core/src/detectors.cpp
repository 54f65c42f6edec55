#include "wmlab/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "child_process.hpp"
#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

namespace {

void require_text(std::span<const TokenId> text) {
  if (text.empty()) throw DataError("detector input must contain at least one token");
}

double guarded_log(double p, bool& clamped) {
  if (p <= 0.0) {
    clamped = true;
    return kLogProbFloor;
  }
  return std::max(std::log(p), kLogProbFloor);
}

}  // namespace

std::size_t token_rank(std::span<const double> probs, TokenId token) {
  const double p = probs[token];
  std::size_t rank = 1;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (probs[v] > p || (probs[v] == p && v < token)) ++rank;
  }
  return rank;
}

TokenStats token_stats(const LanguageModel& lm, std::span<const TokenId> text) {
  require_text(text);
  TokenStats stats;
  stats.log_prob.reserve(text.size());
  stats.rank.reserve(text.size());
  TokenSequence context{Vocabulary::kBos};
  context.reserve(text.size() + 1);
  for (TokenId y : text) {
    const auto dist = lm.next_distribution(std::span<const TokenId>(context));
    if (y >= dist.probs.size()) throw DataError("token id outside the model vocabulary");
    stats.log_prob.push_back(guarded_log(dist.probs[y], stats.clamped));
    stats.rank.push_back(token_rank(dist.probs, y));
    context.push_back(y);
  }
  return stats;
}

DetectorScore log_likelihood_score(const TokenStats& stats) {
  const double sum = std::accumulate(stats.log_prob.begin(), stats.log_prob.end(), 0.0);
  return {sum / static_cast<double>(stats.log_prob.size()), stats.clamped};
}

DetectorScore mean_rank_score(const TokenStats& stats) {
  double sum = 0.0;
  for (auto r : stats.rank) sum += static_cast<double>(r);
  return {-sum / static_cast<double>(stats.rank.size()), stats.clamped};
}

DetectorScore lrr_score(const TokenStats& stats) {
  double log_p = 0.0;
  double log_r = 0.0;
  for (std::size_t i = 0; i < stats.rank.size(); ++i) {
    log_p += stats.log_prob[i];
    log_r += std::log(static_cast<double>(stats.rank[i]));
  }
  if (log_r == 0.0) return {kSentinelScore, true};
  return {-log_p / log_r, stats.clamped};
}

DetectorScore log_likelihood_score(const LanguageModel& lm, std::span<const TokenId> text) {
  return log_likelihood_score(token_stats(lm, text));
}

DetectorScore mean_rank_score(const LanguageModel& lm, std::span<const TokenId> text) {
  return mean_rank_score(token_stats(lm, text));
}

DetectorScore lrr_score(const LanguageModel& lm, std::span<const TokenId> text) {
  return lrr_score(token_stats(lm, text));
}

BinocularsTerms binoculars_terms(const LanguageModel& lm1, const LanguageModel& lm2,
                                 std::span<const TokenId> text) {
  require_text(text);
  if (!(lm1.vocabulary() == lm2.vocabulary())) {
    throw ValidationError("binoculars models must share a vocabulary");
  }
  BinocularsTerms out;
  out.log_p1.reserve(text.size());
  out.cross.reserve(text.size());
  TokenSequence context{Vocabulary::kBos};
  for (TokenId y : text) {
    const auto d1 = lm1.next_distribution(std::span<const TokenId>(context));
    const auto d2 = lm2.next_distribution(std::span<const TokenId>(context));
    out.log_p1.push_back(guarded_log(d1.probs[y], out.clamped));
    double cross = 0.0;
    for (std::size_t v = 0; v < d1.probs.size(); ++v) {
      if (d1.probs[v] > 0.0) cross += d1.probs[v] * guarded_log(d2.probs[v], out.clamped);
    }
    out.cross.push_back(cross);
    context.push_back(y);
  }
  return out;
}

DetectorScore binoculars_score(const BinocularsTerms& terms) {
  if (terms.log_p1.empty()) throw DataError("empty text is unscorable");
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < terms.log_p1.size(); ++i) {
    numerator += terms.log_p1[i];
    denominator += terms.cross[i];
  }
  if (denominator == 0.0) return {kSentinelScore, true};
  return {numerator / denominator, terms.clamped};
}

DetectorScore binoculars_score(const LanguageModel& lm1, const LanguageModel& lm2,
                               std::span<const TokenId> text) {
  return binoculars_score(binoculars_terms(lm1, lm2, text));
}

// Subprocess scorer ------------------------------------------------------------

struct SubprocessScorer::Process {
  explicit Process(const std::string& cmd) : child(cmd) {}
  detail::ChildProcess child;
};

SubprocessScorer::SubprocessScorer(std::string command)
    : proc_(std::make_unique<Process>(command)) {}

SubprocessScorer::~SubprocessScorer() = default;

double SubprocessScorer::score(std::string_view text) const {
  proc_->child.send_framed(text);
  const std::string reply = proc_->child.read_line();
  char* end = nullptr;
  const double value = std::strtod(reply.c_str(), &end);
  if (reply.empty() || end == reply.c_str() || *end != '\0' || !std::isfinite(value)) {
    throw DataError("external scorer returned a non-numeric reply: '" + reply + "'");
  }
  if (value < 0.0 || value > 1.0) throw DataError("external scorer returned a value outside [0,1]");
  return value;
}

// Hashed n-gram classifier -----------------------------------------------------

namespace {

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

double dot(const SparseVec& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += w[i] * v;
  return s;
}

}  // namespace

std::vector<std::pair<std::uint32_t, double>> ngram_features(std::string_view text, std::size_t dim,
                                                             std::size_t max_order) {
  if (dim < 2) throw ValidationError("classifier feature dimension must be >= 2");
  const auto words = split_words(text);
  std::unordered_map<std::uint32_t, double> counts;
  for (std::size_t n = 1; n <= max_order; ++n) {
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
      std::uint64_t h = kFnvOffset;
      const char order = static_cast<char>(n);
      fnv_mix(h, std::string_view(&order, 1));
      for (std::size_t j = 0; j < n; ++j) {
        fnv_mix(h, "\x1f");
        fnv_mix(h, words[i + j]);
      }
      counts[static_cast<std::uint32_t>(h % dim)] += 1.0;
    }
  }
  SparseVec out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  double norm = 0.0;
  for (const auto& e : out) norm += e.second * e.second;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (auto& e : out) e.second /= norm;
  }
  return out;
}

std::string half_length(std::string_view text) {
  const auto words = split_words(text);
  if (words.empty()) return {};
  const std::size_t keep = std::max<std::size_t>(1, words.size() / 2);
  const auto* begin = words.front().data();
  const auto* end = words[keep - 1].data() + words[keep - 1].size();
  return std::string(begin, end);
}

NGramClassifier::NGramClassifier(std::size_t dim, std::size_t max_order, std::vector<double> weights,
                                 double bias)
    : dim_(dim), max_order_(max_order), weights_(std::move(weights)), bias_(bias) {
  if (dim_ < 2) throw ValidationError("classifier feature dimension must be >= 2");
  if (max_order_ < 1) throw ValidationError("classifier n-gram order must be >= 1");
  if (weights_.size() != dim_) throw DataError("classifier weight vector does not match dim");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw DataError("classifier weights must be finite");
  }
  if (!std::isfinite(bias_)) throw DataError("classifier bias must be finite");
}

double NGramClassifier::logit(std::string_view text) const {
  return dot(ngram_features(text, dim_, max_order_), weights_) + bias_;
}

double NGramClassifier::score(std::string_view text) const { return sigmoid(logit(text)); }

std::string NGramClassifier::serialize() const {
  nlohmann::ordered_json j;
  j["format"] = "wmlab-ngram-classifier";
  j["version"] = 1;
  j["dim"] = dim_;
  j["max_order"] = max_order_;
  j["bias"] = bias_;
  j["metadata"] = {{"positives", metadata.positives}, {"negatives", metadata.negatives},
                   {"epochs", metadata.epochs},       {"lr", metadata.lr},
                   {"l2", metadata.l2},               {"length_augment", metadata.length_augment},
                   {"seed", metadata.seed},           {"final_loss", metadata.final_loss}};
  j["weights"] = weights_;
  return j.dump() + "\n";
}

NGramClassifier NGramClassifier::deserialize(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "wmlab-ngram-classifier") throw DataError("not a wmlab classifier file");
    if (j.at("version") != 1) throw DataError("unsupported classifier file version");
    NGramClassifier model(j.at("dim").get<std::size_t>(), j.at("max_order").get<std::size_t>(),
                          j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>());
    const auto& m = j.at("metadata");
    model.metadata.positives = m.at("positives");
    model.metadata.negatives = m.at("negatives");
    model.metadata.epochs = m.at("epochs");
    model.metadata.lr = m.at("lr");
    model.metadata.l2 = m.at("l2");
    model.metadata.length_augment = m.at("length_augment");
    model.metadata.seed = m.at("seed");
    model.metadata.final_loss = m.at("final_loss");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier file: ") + e.what());
  }
}

void NGramClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize();
}

NGramClassifier NGramClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read classifier model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

NGramClassifier train_ngram_classifier(std::span<const std::string> positives,
                                       std::span<const std::string> negatives,
                                       const NGramClassifierConfig& cfg) {
  if (cfg.dim < 2) throw ValidationError("classifier feature dimension must be >= 2");
  if (cfg.max_order < 1) throw ValidationError("classifier n-gram order must be >= 1");
  if (cfg.lr <= 0 || cfg.l2 < 0) throw ValidationError("classifier lr must be > 0 and l2 >= 0");
  if (positives.empty() || negatives.empty()) {
    throw DataError("classifier training needs both positive and negative examples");
  }

  std::vector<std::pair<int, std::string>> texts;
  auto add = [&](std::span<const std::string> src, int label) {
    for (const auto& t : src) {
      texts.emplace_back(label, t);
      if (cfg.length_augment) texts.emplace_back(label, half_length(t));
    }
  };
  add(positives, 1);
  add(negatives, 0);
  std::sort(texts.begin(), texts.end());

  std::vector<SparseVec> features;
  features.reserve(texts.size());
  for (const auto& t : texts) features.push_back(ngram_features(t.second, cfg.dim, cfg.max_order));

  std::vector<double> v(cfg.dim, 0.0);
  double scale = 1.0;  // weights = scale * v
  double bias = 0.0;
  std::vector<std::size_t> order(texts.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  const double decay = 1.0 - cfg.lr * cfg.l2;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t idx : order) {
      const auto& x = features[idx];
      const double p = sigmoid(scale * dot(x, v) + bias);
      const double g = p - static_cast<double>(texts[idx].first);
      scale *= decay;
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
      for (const auto& [i, val] : x) v[i] -= cfg.lr * g * val / scale;
      bias -= cfg.lr * g;
    }
  }
  for (double& w : v) w *= scale;

  double loss = 0.0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const double p = std::clamp(sigmoid(dot(features[i], v) + bias), 1e-15, 1.0 - 1e-15);
    loss -= texts[i].first ? std::log(p) : std::log(1.0 - p);
  }
  loss /= static_cast<double>(texts.size());

  NGramClassifier model(cfg.dim, cfg.max_order, std::move(v), bias);
  model.metadata = {positives.size(), negatives.size(), cfg.epochs, cfg.lr, cfg.l2,
                    cfg.length_augment, cfg.seed, loss};
  return model;
}

}  // namespace wmlab
