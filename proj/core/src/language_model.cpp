#include "wmlab/language_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

namespace {

std::string context_key(std::span<const TokenId> ids) {
  std::string key;
  key.reserve(ids.size() * 4);
  for (auto id : ids) {
    for (int shift = 24; shift >= 0; shift -= 8) key.push_back(static_cast<char>(id >> shift));
  }
  return key;
}

std::vector<TokenId> key_ids(const std::string& key) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i + 3 < key.size(); i += 4) {
    TokenId v = 0;
    for (std::size_t j = 0; j < 4; ++j) v = (v << 8) | static_cast<unsigned char>(key[i + j]);
    ids.push_back(v);
  }
  return ids;
}

constexpr const char* kModelFormat = "wmlab-ngram";
constexpr int kModelVersion = 1;

}  // namespace

void NextTokenDistribution::validate(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("distribution has a negative or non-finite entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > tol) throw DataError("distribution does not sum to 1");
}

NextTokenDistribution LanguageModel::next_distribution(std::span<const TokenId> prompt,
                                                       std::span<const TokenId> partial) const {
  TokenSequence ctx = make_context(prompt);
  ctx.insert(ctx.end(), partial.begin(), partial.end());
  return next_distribution(std::span<const TokenId>(ctx));
}

TokenSequence make_context(std::span<const TokenId> prompt) {
  TokenSequence ctx;
  ctx.reserve(prompt.size() + 1);
  ctx.push_back(Vocabulary::kBos);
  ctx.insert(ctx.end(), prompt.begin(), prompt.end());
  return ctx;
}

// MemorylessModel -------------------------------------------------------------

MemorylessModel::MemorylessModel(Vocabulary vocab, std::vector<double> probs)
    : vocab_(std::move(vocab)), dist_{std::move(probs)} {
  if (dist_.probs.size() != vocab_.size()) throw ValidationError("distribution size must equal V");
  dist_.validate();
}

MemorylessModel MemorylessModel::uniform(Vocabulary vocab) {
  const std::size_t v = vocab.size();
  return MemorylessModel(std::move(vocab), std::vector<double>(v, 1.0 / static_cast<double>(v)));
}

// NGramModel -------------------------------------------------------------------

NGramModel::NGramModel(Vocabulary vocab, std::size_t order, double alpha, std::size_t context_limit)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha), context_limit_(context_limit) {
  if (order_ < 1) throw ValidationError("n-gram order must be >= 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ValidationError("smoothing alpha must be > 0");
}

void NGramModel::add_sequence(std::span<const TokenId> ids) {
  TokenSequence seq;
  seq.reserve(ids.size() + 2);
  seq.push_back(Vocabulary::kBos);
  for (auto id : ids) {
    if (id >= vocab_.size()) throw DataError("training token id out of vocabulary range");
    seq.push_back(id);
  }
  seq.push_back(Vocabulary::kEos);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    for (std::size_t len = 0; len < order_ && len <= i; ++len) {
      auto& succ = table_[context_key(std::span<const TokenId>(seq).subspan(i - len, len))];
      ++succ.total;
      auto it = std::find_if(succ.next.begin(), succ.next.end(),
                             [&](const auto& e) { return e.first == seq[i]; });
      if (it == succ.next.end()) {
        succ.next.emplace_back(seq[i], 1);
      } else {
        ++it->second;
      }
    }
  }
}

void NGramModel::finalize() {
  for (auto& [key, succ] : table_) std::sort(succ.next.begin(), succ.next.end());
}

const NGramModel::Successors* NGramModel::find(std::span<const TokenId> ctx) const {
  auto it = table_.find(context_key(ctx));
  if (it == table_.end() || it->second.total == 0) return nullptr;
  return &it->second;
}

std::size_t NGramModel::backoff_length(std::span<const TokenId> context) const {
  const std::size_t max_len = std::min(order_ - 1, context.size());
  for (std::size_t len = max_len; len > 0; --len) {
    if (find(context.subspan(context.size() - len, len)) != nullptr) return len;
  }
  return 0;
}

NextTokenDistribution NGramModel::next_distribution(std::span<const TokenId> context) const {
  if (context.size() > context_limit_) throw ValidationError("context exceeds the model's limit");
  const std::size_t len = backoff_length(context);
  const Successors* succ = find(context.subspan(context.size() - len, len));
  if (succ == nullptr) throw DataError("n-gram model has no unigram counts (untrained)");
  const double v = static_cast<double>(vocab_.size());
  const double denom = static_cast<double>(succ->total) + alpha_ * v;
  NextTokenDistribution dist{std::vector<double>(vocab_.size(), alpha_ / denom)};
  for (const auto& [tok, count] : succ->next) {
    dist.probs[tok] = (static_cast<double>(count) + alpha_) / denom;
  }
  return dist;
}

std::string NGramModel::serialize() const {
  using nlohmann::json;
  // Sorted by key so the file (and its digest) is a pure function of the counts.
  std::map<std::string, const Successors*> sorted;
  for (const auto& [key, succ] : table_) sorted.emplace(key, &succ);
  json contexts = json::array();
  for (const auto& [key, succ] : sorted) {
    json next = json::array();
    for (const auto& [tok, count] : succ->next) next.push_back({tok, count});
    contexts.push_back({{"ctx", key_ids(key)}, {"total", succ->total}, {"next", std::move(next)}});
  }
  json doc = {{"format", kModelFormat},
              {"version", kModelVersion},
              {"order", order_},
              {"alpha", alpha_},
              {"context_limit", context_limit_},
              {"byte_fallback", vocab_.has_byte_fallback()},
              {"pieces", vocab_.pieces()},
              {"contexts", std::move(contexts)}};
  return doc.dump() + "\n";
}

NGramModel NGramModel::deserialize(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed n-gram model file: ") + e.what());
  }
  if (doc.value("format", "") != kModelFormat || doc.value("version", 0) != kModelVersion) {
    throw DataError("unsupported n-gram model format or version");
  }
  NGramModel model(Vocabulary(doc.at("pieces").get<std::vector<std::string>>(),
                              doc.at("byte_fallback").get<bool>()),
                   doc.at("order").get<std::size_t>(), doc.at("alpha").get<double>(),
                   doc.at("context_limit").get<std::size_t>());
  for (const auto& c : doc.at("contexts")) {
    Successors succ;
    succ.total = c.at("total").get<std::uint64_t>();
    for (const auto& e : c.at("next")) succ.next.emplace_back(e.at(0).get<TokenId>(), e.at(1).get<std::uint64_t>());
    const auto ids = c.at("ctx").get<std::vector<TokenId>>();
    model.table_.emplace(context_key(ids), std::move(succ));
  }
  return model;
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << serialize();
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

NGramModel train_ngram_lm(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                          std::size_t order, double alpha) {
  if (corpus.empty()) throw DataError("cannot train an n-gram model on an empty corpus");
  NGramModel model(vocab, order, alpha);
  for (const auto& doc : corpus) model.add_sequence(doc);
  model.finalize();
  return model;
}

// Decoding ---------------------------------------------------------------------

TokenSequence decode(const LanguageModel& lm, std::span<const TokenId> prompt,
                     const GenerationLimits& limits, const TokenSelector& select) {
  if (limits.min_new > limits.max_new) throw ValidationError("min_new must not exceed max_new");
  TokenSequence context = make_context(prompt);
  if (context.size() > lm.context_limit()) throw ValidationError("prompt exceeds the model's context limit");
  const std::size_t prompt_end = context.size();
  for (std::size_t step = 0; step < limits.max_new; ++step) {
    auto dist = lm.next_distribution(std::span<const TokenId>(context));
    auto& p = dist.probs;
    p[Vocabulary::kBos] = 0.0;
    if (step < limits.min_new) p[Vocabulary::kEos] = 0.0;
    double total = 0.0;
    for (double x : p) total += x;
    if (!(total > 0.0)) throw DataError("degenerate next-token distribution after masking");
    for (double& x : p) x /= total;
    const TokenId tok = select(context, p, step);
    if (tok == Vocabulary::kEos) break;
    context.push_back(tok);
  }
  return TokenSequence(context.begin() + static_cast<std::ptrdiff_t>(prompt_end), context.end());
}

TokenSequence sample(const LanguageModel& lm, std::span<const TokenId> prompt,
                     const GenerationLimits& limits, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return decode(lm, prompt, limits,
                [&](std::span<const TokenId>, std::span<const double> probs, std::size_t) {
                  return static_cast<TokenId>(rng.categorical(probs));
                });
}

}  // namespace wmlab
