#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

KuditipudiConfig KuditipudiConfig::from_key(const WatermarkKey& key, std::size_t list_length) {
  KuditipudiConfig cfg;
  cfg.seed_list.reserve(list_length);
  for (std::size_t j = 0; j < list_length; ++j) {
    Bytes ctx = {'s', 'e', 'e', 'd'};
    append_be64(ctx, j);
    cfg.seed_list.push_back(prf_seed(key, ctx));
  }
  return cfg;
}

void KuditipudiConfig::validate() const {
  if (seed_list.empty()) throw ValidationError("kuditipudi: seed list must be non-empty");
  if (n_ref < 1) throw ValidationError("kuditipudi: n_ref must be >= 1");
  if (!(edit_cost >= 0.0) || !std::isfinite(edit_cost)) throw ValidationError("kuditipudi: edit cost must be finite and >= 0");
}

std::string KuditipudiConfig::seed_list_digest() const {
  Bytes all;
  for (auto s : seed_list) append_be64(all, s);
  return to_hex(sha256(all));
}

double kuditipudi_uniform(std::uint64_t seed_value, TokenId token) {
  std::uint8_t key[8];
  std::uint8_t ctx[4];
  for (int b = 0; b < 8; ++b) key[b] = static_cast<std::uint8_t>(seed_value >> (56 - 8 * b));
  for (int b = 0; b < 4; ++b) ctx[b] = static_cast<std::uint8_t>(token >> (24 - 8 * b));
  return seed_to_unit(prf_seed_raw(key, ctx));
}

TokenId kuditipudi_select(std::span<const double> probs, std::uint64_t seed_value) {
  double best = -std::numeric_limits<double>::infinity();
  std::optional<TokenId> chosen;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) continue;
    const auto id = static_cast<TokenId>(i);
    const double value = std::log(kuditipudi_uniform(seed_value, id)) / probs[i];
    if (!chosen || value > best) {
      best = value;
      chosen = id;
    }
  }
  if (!chosen) throw DataError("kuditipudi: distribution has empty support");
  return *chosen;
}

TokenSequence kuditipudi_generate(const LanguageModel& lm, std::span<const TokenId> prompt,
                                  const KuditipudiConfig& cfg, const GenerationLimits& limits,
                                  std::uint64_t start_rng) {
  cfg.validate();
  Rng rng(start_rng);
  const std::size_t start = rng.below(cfg.seed_list.size());
  return decode(lm, prompt, limits,
                [&](std::span<const TokenId>, std::span<const double> probs, std::size_t step) {
                  return kuditipudi_select(probs, cfg.seed_list[(start + step) % cfg.seed_list.size()]);
                });
}

namespace {

// cost[j][i] = log(1 - u_j(text_i)) for every list position j.
std::vector<std::vector<double>> substitution_costs(std::span<const TokenId> text,
                                                    const KuditipudiConfig& cfg) {
  const std::size_t k = cfg.seed_list.size();
  std::vector<std::vector<double>> cost(k, std::vector<double>(text.size()));
  std::unordered_map<TokenId, double> cache;
  for (std::size_t j = 0; j < k; ++j) {
    cache.clear();
    for (std::size_t i = 0; i < text.size(); ++i) {
      auto [it, fresh] = cache.try_emplace(text[i], 0.0);
      if (fresh) {
        const double u = std::min(kuditipudi_uniform(cfg.seed_list[j], text[i]), 1.0 - 1e-15);
        it->second = std::log1p(-u);
      }
      cost[j][i] = it->second;
    }
  }
  return cost;
}

double align(const std::vector<std::vector<double>>& cost, std::size_t length, std::size_t shift,
             double gap, std::vector<double>& prev, std::vector<double>& cur) {
  const std::size_t k = cost.size();
  // Rows walk the seed sequence, columns the text.
  for (std::size_t i = 0; i <= length; ++i) prev[i] = gap * static_cast<double>(i);
  for (std::size_t r = 1; r <= length; ++r) {
    const auto& row_cost = cost[(shift + r - 1) % k];
    cur[0] = gap * static_cast<double>(r);
    for (std::size_t c = 1; c <= length; ++c) {
      const double sub = prev[c - 1] + row_cost[c - 1];
      const double del = prev[c] + gap;
      const double ins = cur[c - 1] + gap;
      cur[c] = std::min(sub, std::min(del, ins));
    }
    std::swap(prev, cur);
  }
  return prev[length];
}

}  // namespace

double kuditipudi_alignment_cost(std::span<const TokenId> text, const KuditipudiConfig& cfg,
                                 std::size_t shift) {
  cfg.validate();
  const auto cost = substitution_costs(text, cfg);
  std::vector<double> prev(text.size() + 1), cur(text.size() + 1);
  return align(cost, text.size(), shift % cfg.seed_list.size(), cfg.edit_cost, prev, cur);
}

double kuditipudi_min_cost(std::span<const TokenId> text, const KuditipudiConfig& cfg) {
  cfg.validate();
  if (text.empty()) throw DataError("kuditipudi: empty text is unscorable");
  const auto cost = substitution_costs(text, cfg);
  std::vector<double> prev(text.size() + 1), cur(text.size() + 1);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < cfg.seed_list.size(); ++s) {
    best = std::min(best, align(cost, text.size(), s, cfg.edit_cost, prev, cur));
  }
  return best;
}

// References -------------------------------------------------------------------

void KuditipudiReferences::set(std::size_t length, std::vector<double> costs) {
  std::sort(costs.begin(), costs.end());
  tables_[length] = std::move(costs);
}

const std::vector<double>& KuditipudiReferences::costs(std::size_t length) const {
  auto it = tables_.find(length);
  if (it == tables_.end()) {
    throw DataError("kuditipudi: no reference table for length " + std::to_string(length) +
                    "; run the reference precomputation for this length");
  }
  return it->second;
}

std::vector<std::size_t> KuditipudiReferences::lengths() const {
  std::vector<std::size_t> out;
  for (const auto& [len, _] : tables_) out.push_back(len);
  return out;
}

std::optional<std::size_t> KuditipudiReferences::resolve_length(std::size_t text_length) const {
  auto it = tables_.upper_bound(text_length);
  if (it == tables_.begin()) return std::nullopt;
  return std::prev(it)->first;
}

std::string KuditipudiReferences::serialize() const {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [len, costs] : tables_) tables[std::to_string(len)] = costs;
  nlohmann::json doc = {{"format", "wmlab-kuditipudi-references"},
                        {"version", 1},
                        {"seed_list_digest", digest_},
                        {"edit_cost", edit_cost_},
                        {"tables", std::move(tables)}};
  return doc.dump() + "\n";
}

KuditipudiReferences KuditipudiReferences::deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed reference file: ") + e.what());
  }
  if (doc.value("format", "") != "wmlab-kuditipudi-references" || doc.value("version", 0) != 1) {
    throw DataError("unsupported reference file format or version");
  }
  KuditipudiReferences refs(doc.at("seed_list_digest").get<std::string>(),
                            doc.at("edit_cost").get<double>());
  for (const auto& [len, costs] : doc.at("tables").items()) {
    refs.set(std::stoul(len), costs.get<std::vector<double>>());
  }
  return refs;
}

void KuditipudiReferences::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write reference file " + path.string());
  out << serialize();
}

KuditipudiReferences KuditipudiReferences::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read reference file " + path.string() +
                    "; precompute it with the reference step first");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

KuditipudiReferences kuditipudi_precompute_references(const KuditipudiConfig& cfg,
                                                      std::span<const TokenSequence> null_corpus,
                                                      std::span<const std::size_t> lengths,
                                                      std::uint64_t rng_seed) {
  cfg.validate();
  KuditipudiReferences refs(cfg.seed_list_digest(), cfg.edit_cost);
  for (std::size_t length : lengths) {
    if (length == 0) throw ValidationError("kuditipudi: reference length must be >= 1");
    // Every (document, offset) window of this length, addressed by a flat index.
    std::vector<std::size_t> doc_index;
    std::vector<std::uint64_t> prefix;
    std::uint64_t windows = 0;
    for (std::size_t d = 0; d < null_corpus.size(); ++d) {
      if (null_corpus[d].size() < length) continue;
      doc_index.push_back(d);
      prefix.push_back(windows);
      windows += null_corpus[d].size() - length + 1;
    }
    if (windows < cfg.n_ref) {
      throw DataError("kuditipudi: corpus has " + std::to_string(windows) + " snippets of length " +
                      std::to_string(length) + " but " + std::to_string(cfg.n_ref) + " are required");
    }
    Rng rng(derive_seed(rng_seed, "kuditipudi-references", std::to_string(length)));
    std::vector<std::uint64_t> picks;
    if (windows <= 2 * cfg.n_ref) {
      picks.resize(windows);
      for (std::uint64_t i = 0; i < windows; ++i) picks[i] = i;
      for (std::uint64_t i = 0; i < cfg.n_ref; ++i) std::swap(picks[i], picks[i + rng.below(windows - i)]);
      picks.resize(cfg.n_ref);
    } else {
      std::unordered_set<std::uint64_t> taken;
      while (picks.size() < cfg.n_ref) {
        const auto w = rng.below(windows);
        if (taken.insert(w).second) picks.push_back(w);
      }
    }
    std::vector<double> costs;
    costs.reserve(cfg.n_ref);
    for (auto w : picks) {
      const auto pos = static_cast<std::size_t>(std::upper_bound(prefix.begin(), prefix.end(), w) - prefix.begin() - 1);
      const auto& doc = null_corpus[doc_index[pos]];
      const auto offset = static_cast<std::size_t>(w - prefix[pos]);
      costs.push_back(kuditipudi_min_cost(std::span<const TokenId>(doc).subspan(offset, length), cfg));
    }
    refs.set(length, std::move(costs));
  }
  return refs;
}

KuditipudiScore kuditipudi_score(std::span<const TokenId> text, const KuditipudiConfig& cfg,
                                 const KuditipudiReferences& references) {
  cfg.validate();
  if (references.seed_list_digest() != cfg.seed_list_digest() ||
      references.edit_cost() != cfg.edit_cost) {
    throw DataError("kuditipudi: reference table was built for a different seed list or edit cost");
  }
  const auto length = references.resolve_length(text.size());
  if (!length) {
    throw DataError("kuditipudi: no reference table covers a text of " + std::to_string(text.size()) +
                    " tokens; precompute references for this length");
  }
  const auto& costs = references.costs(*length);
  KuditipudiScore out;
  out.scored_length = *length;
  out.min_cost = kuditipudi_min_cost(text.first(*length), cfg);
  const auto at_or_below = static_cast<double>(
      std::upper_bound(costs.begin(), costs.end(), out.min_cost) - costs.begin());
  out.p_value = (1.0 + at_or_below) / (static_cast<double>(costs.size()) + 1.0);
  return out;
}

}  // namespace wmlab
