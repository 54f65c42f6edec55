#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pipeline_internal.hpp"
#include "wmlab/attacks.hpp"
#include "wmlab/dataset.hpp"
#include "wmlab/detectors.hpp"
#include "wmlab/entropy.hpp"
#include "wmlab/error.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

using nlohmann::json;

namespace detail {

const char* const kRegisterFiles[4] = {"assistant", "other", "neutral", "human"};

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

WatermarkKey scheme_key(const RunConfig& cfg, const std::string& scheme) {
  return WatermarkKey::from_integer(derive_seed(cfg.seed, "key", scheme));
}

AaronsonConfig aaronson_config(const RunConfig& cfg) {
  AaronsonConfig c;
  c.n = cfg.schemes.aaronson_n;
  c.key = scheme_key(cfg, "aaronson");
  return c;
}

KirchenbauerConfig kirchenbauer_config(const RunConfig& cfg, const std::string& scheme) {
  KirchenbauerConfig c;
  c.n = cfg.schemes.kirchenbauer_n;
  c.gamma = cfg.schemes.kirchenbauer_gamma;
  c.delta = std::stod(scheme.substr(3));
  c.key = scheme_key(cfg, scheme);
  return c;
}

BahriConfig bahri_config(const RunConfig& cfg) {
  BahriConfig c;
  c.m = cfg.schemes.bahri_m;
  c.n = cfg.schemes.bahri_n;
  c.key = scheme_key(cfg, "bahri");
  return c;
}

KuditipudiConfig kuditipudi_config(const RunConfig& cfg) {
  auto c = KuditipudiConfig::from_key(scheme_key(cfg, "kuditipudi"), cfg.schemes.kuditipudi_list_length);
  c.n_ref = cfg.schemes.kuditipudi_n_ref;
  return c;
}

Models::Models(const RunConfig& cfg, bool observers)
    : ours(NGramModel::load(cfg.models_path() / "ours.json")),
      theirs(NGramModel::load(cfg.models_path() / "theirs.json")) {
  if (observers) {
    observer_small = std::make_unique<NGramModel>(NGramModel::load(cfg.models_path() / "observer_small.json"));
    observer_large = std::make_unique<NGramModel>(NGramModel::load(cfg.models_path() / "observer_large.json"));
  }
}

std::filesystem::path manifest_path(const RunConfig& cfg, const std::string& stem) {
  return cfg.datasets_path() / (stem + ".jsonl");
}

std::vector<std::string> manifest_stems(const RunConfig& cfg) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(cfg.datasets_path())) return out;
  for (const auto& e : std::filesystem::directory_iterator(cfg.datasets_path())) {
    if (e.path().extension() == ".jsonl") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string p_label(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

std::string attack_stem(const std::string& dataset, double p) { return dataset + "@tr" + p_label(p); }

}  // namespace detail

using namespace detail;

namespace {

std::string pad(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

std::string to_text(std::span<const TokenId> ids, const Vocabulary& vocab) { return detokenize(ids, vocab); }

void require_file(const std::filesystem::path& p, const std::string& stage) {
  if (!std::filesystem::exists(p)) throw DataError("missing " + p.string() + "; run the " + stage + " stage first");
}

}  // namespace

void cmd_make_corpus(const RunConfig& cfg) {
  DeskWorld world(cfg.world);
  const Register regs[] = {Register::Assistant, Register::Other, Register::Neutral, Register::Human};
  for (std::size_t k = 0; k < 4; ++k) {
    Rng rng(derive_seed(cfg.seed, "corpus", kRegisterFiles[k]));
    std::string text;
    for (std::size_t i = 0; i < cfg.docs_per_register; ++i) {
      const std::size_t words = cfg.doc_words_min + rng.below(cfg.doc_words_max - cfg.doc_words_min + 1);
      text += world.document(regs[k], i % cfg.world.topics, words, rng);
      text += "\n";
    }
    write_text(cfg.corpus_path() / (std::string(kRegisterFiles[k]) + ".txt"), text);
  }
}

void cmd_train_lm(const RunConfig& cfg) {
  std::map<std::string, std::vector<std::string>> docs;
  std::vector<std::string> all;
  for (const char* name : kRegisterFiles) {
    const auto path = cfg.corpus_path() / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) {
      throw ValidationError("corpus file " + path.string() + " is missing; run make-corpus or set corpus_dir");
    }
    docs[name] = read_lines(path);
    if (docs[name].empty()) throw DataError("corpus file " + path.string() + " is empty");
    all.insert(all.end(), docs[name].begin(), docs[name].end());
  }
  const auto vocab = Vocabulary::build(all, cfg.max_pieces);
  auto tokenize_all = [&](const std::vector<std::string>& d) {
    std::vector<TokenSequence> out;
    out.reserve(d.size());
    for (const auto& s : d) out.push_back(tokenize(s, vocab));
    return out;
  };
  std::filesystem::create_directories(cfg.models_path());
  json digests = json::object();
  auto save = [&](const NGramModel& m, const std::string& name) {
    const auto path = cfg.models_path() / (name + ".json");
    m.save(path);
    digests[name] = file_digest(path);
  };
  save(train_ngram_lm(tokenize_all(docs["assistant"]), vocab, cfg.lm_order, cfg.lm_alpha), "ours");
  save(train_ngram_lm(tokenize_all(docs["other"]), vocab, cfg.lm_order, cfg.lm_alpha), "theirs");
  const auto neutral = tokenize_all(docs["neutral"]);
  save(train_ngram_lm(neutral, vocab, cfg.observer_small_order, cfg.lm_alpha), "observer_small");
  save(train_ngram_lm(neutral, vocab, cfg.observer_large_order, cfg.lm_alpha), "observer_large");
  write_text(cfg.models_path() / "digests.json", digests.dump(2) + "\n");
}

void cmd_references(const RunConfig& cfg) {
  if (!cfg.schemes.kuditipudi) return;
  const auto model_path = cfg.models_path() / "ours.json";
  require_file(model_path, "train-lm");
  const auto lm = NGramModel::load(model_path);
  std::vector<TokenSequence> null_corpus;
  for (const auto& d : read_lines(cfg.corpus_path() / "human.txt")) null_corpus.push_back(tokenize(d, lm.vocabulary()));
  std::vector<std::size_t> lengths = cfg.eval.lengths;
  std::sort(lengths.begin(), lengths.end());
  const auto refs = kuditipudi_precompute_references(kuditipudi_config(cfg), null_corpus, lengths,
                                                     derive_seed(cfg.seed, "references"));
  refs.save(cfg.models_path() / "kuditipudi_references.json");
}

void cmd_train_classifier(const RunConfig& cfg) {
  if (std::find(cfg.detectors.begin(), cfg.detectors.end(), "classifier") == cfg.detectors.end()) return;
  const Models models(cfg, false);
  const auto& vocab = models.ours.vocabulary();
  DeskWorld world(cfg.world);
  std::vector<std::string> pos, neg;
  for (std::size_t i = 0; i < cfg.classifier.train_prompts; ++i) {
    const std::string id = "classifier/" + pad(i);
    Rng rng(derive_seed(cfg.seed, "classifier-data", id));
    const auto p = world.prompt(id, "write", rng.below(cfg.world.topics), rng);
    const auto ptok = tokenize(p.text, vocab);
    pos.push_back(to_text(sample(models.ours, ptok, cfg.limits, rng.next_u64()), vocab));
    if (i % 2 == 0) {
      neg.push_back(to_text(sample(models.theirs, ptok, cfg.limits, rng.next_u64()), vocab));
    } else {
      const std::size_t words = cfg.limits.min_new + rng.below(cfg.limits.max_new - cfg.limits.min_new + 1);
      neg.push_back(truncate_record(world.respond(Register::Human, p, words, rng), cfg.limits.max_new, vocab));
    }
  }
  NGramClassifierConfig c;
  c.dim = cfg.classifier.dim;
  c.epochs = cfg.classifier.epochs;
  c.lr = cfg.classifier.lr;
  c.length_augment = cfg.classifier.length_augment;
  c.seed = derive_seed(cfg.seed, "classifier");
  train_ngram_classifier(pos, neg, c).save(cfg.models_path() / "classifier.json");
}

void cmd_generate(const RunConfig& cfg) {
  const Models models(cfg, false);
  const auto& vocab = models.ours.vocabulary();
  DeskWorld world(cfg.world);
  const auto schemes = cfg.scheme_names();
  const auto aaronson = aaronson_config(cfg);
  const auto bahri = bahri_config(cfg);
  const auto kuditipudi = kuditipudi_config(cfg);
  std::map<std::string, KirchenbauerConfig> kb;
  for (const auto& s : schemes) {
    if (s.rfind("kb-", 0) == 0) kb.emplace(s, kirchenbauer_config(cfg, s));
  }
  for (const auto& spec : cfg.datasets) {
    Dataset out;
    for (std::size_t i = 0; i < spec.prompts; ++i) {
      const std::string pid = spec.name + "/" + pad(i);
      Rng prng(derive_seed(cfg.seed, "prompt", pid));
      const auto p = world.prompt(pid, spec.lead, prng.below(cfg.world.topics), prng);
      const auto ptok = tokenize(p.text, vocab);
      auto add = [&](const std::string& kind, const std::string& source, bool positive, std::string text) {
        DatasetRecord r;
        r.id = pid + "/" + kind;
        r.prompt_id = pid;
        r.dataset = spec.name;
        r.split = spec.split;
        r.prompt = p.text;
        r.response = std::move(text);
        r.positive = positive;
        r.source = source;
        out.push_back(std::move(r));
      };
      auto seed_for = [&](const std::string& kind) { return derive_seed(cfg.seed, "generate", pid + "/" + kind); };
      for (std::size_t j = 0; j < cfg.plain_per_prompt; ++j) {
        const std::string kind = "plain-" + std::to_string(j);
        add(kind, "ours-plain", true, to_text(sample(models.ours, ptok, cfg.limits, seed_for(kind)), vocab));
      }
      for (const auto& s : schemes) {
        const std::string kind = "wm-" + s;
        TokenSequence ids;
        if (s == "aaronson") {
          ids = aaronson_generate(models.ours, ptok, aaronson, cfg.limits);
        } else if (s == "bahri") {
          ids = bahri_generate(models.ours, ptok, bahri, cfg.limits, seed_for(kind));
        } else if (s == "kuditipudi") {
          ids = kuditipudi_generate(models.ours, ptok, kuditipudi, cfg.limits, seed_for(kind));
        } else {
          ids = kirchenbauer_generate(models.ours, ptok, kb.at(s), cfg.limits, seed_for(kind));
        }
        add(kind, "ours-watermarked:" + s, true, to_text(ids, vocab));
      }
      add("theirs", "theirs", false, to_text(sample(models.theirs, ptok, cfg.limits, seed_for("theirs")), vocab));
      Rng hrng(seed_for("human"));
      const std::size_t words = cfg.limits.min_new + hrng.below(cfg.limits.max_new - cfg.limits.min_new + 1);
      add("human", "human", false, truncate_record(world.respond(Register::Human, p, words, hrng), cfg.limits.max_new, vocab));
    }
    validate_dataset(out);
    std::filesystem::create_directories(cfg.datasets_path());
    write_manifest(manifest_path(cfg, spec.name), out);
    json meta = {{"dataset", spec.name},
                 {"split", spec.split},
                 {"records", out.size()},
                 {"config_digest", cfg.digest()},
                 {"models",
                  {{"ours", file_digest(cfg.models_path() / "ours.json")},
                   {"theirs", file_digest(cfg.models_path() / "theirs.json")}}}};
    write_text(cfg.datasets_path() / (spec.name + ".meta.json"), meta.dump(2) + "\n");
  }
}

void cmd_entropy(const RunConfig& cfg) {
  const Models models(cfg, false);
  const auto& vocab = models.ours.vocabulary();
  for (const auto& spec : cfg.datasets) {
    const auto path = manifest_path(cfg, spec.name);
    require_file(path, "generate");
    auto data = read_manifest(path);
    std::map<std::string, std::vector<TokenSequence>> plain;
    std::map<std::string, std::string> prompts;
    for (const auto& r : data) {
      prompts[r.prompt_id] = r.prompt;
      if (r.source == "ours-plain") plain[r.prompt_id].push_back(tokenize(r.response, vocab));
    }
    std::vector<PromptEntropy> est;
    for (const auto& [pid, text] : prompts) {
      auto it = plain.find(pid);
      if (it == plain.end()) throw DataError("prompt " + pid + " has no plain responses for entropy estimation");
      const auto ptok = tokenize(text, vocab);
      est.push_back({pid, entropy_from_samples(models.ours, ptok, it->second, cfg.entropy_horizon).total});
    }
    const auto buckets = bucket_by_entropy(est);
    std::map<std::string, double> by_id;
    for (const auto& e : est) by_id[e.prompt_id] = e.entropy;
    for (auto& r : data) {
      r.entropy = by_id.at(r.prompt_id);
      r.bucket = buckets.bucket_of(r.prompt_id);
    }
    write_manifest(path, data);
    json j = {{"dataset", spec.name}, {"upper", buckets.upper}, {"prompts", json::array()}};
    for (const auto& e : est) {
      j["prompts"].push_back({{"prompt_id", e.prompt_id}, {"entropy", e.entropy}, {"bucket", buckets.bucket_of(e.prompt_id)}});
    }
    write_text(cfg.datasets_path() / (spec.name + ".entropy.json"), j.dump(2) + "\n");
  }
}

void cmd_attack(const RunConfig& cfg) {
  const Models models(cfg, false);
  const auto& vocab = models.ours.vocabulary();
  std::set<std::string> keep_sources{"theirs", "human"};
  for (const auto& s : cfg.attacks.schemes) keep_sources.insert("ours-watermarked:" + s);
  std::unique_ptr<Paraphraser> para;
  if (cfg.attacks.paraphrase) {
    if (cfg.attacks.paraphrase_command.empty()) {
      para = std::make_unique<ResampleParaphraser>(models.ours, cfg.attacks.paraphrase_keep);
    } else {
      para = std::make_unique<SubprocessParaphraser>(cfg.attacks.paraphrase_command);
    }
  }
  for (const auto& spec : cfg.datasets) {
    const auto path = manifest_path(cfg, spec.name);
    require_file(path, "generate");
    Dataset base;
    for (auto& r : read_manifest(path)) {
      if (keep_sources.count(r.source)) base.push_back(std::move(r));
    }
    auto run = [&](const AttackConfig& ac, const std::string& stem) {
      AttackManifest manifest;
      const auto attacked = apply_attack_protocol(base, ac, vocab, para.get(), &manifest);
      write_manifest(manifest_path(cfg, stem), attacked);
      write_text(cfg.datasets_path() / (stem + ".attack.json"), manifest.serialize());
    };
    for (double p : cfg.attacks.token_replace_p) {
      run({AttackKind::TokenReplace, p, derive_seed(cfg.seed, "attack", "tr" + p_label(p))}, attack_stem(spec.name, p));
    }
    if (para) run({AttackKind::Paraphrase, 0.0, derive_seed(cfg.seed, "attack", "paraphrase")}, spec.name + "@para");
  }
}

// Scoring ----------------------------------------------------------------------

namespace {

struct Scorers {
  explicit Scorers(const RunConfig& cfg) : cfg(cfg), models(cfg, true) {
    aaronson = aaronson_config(cfg);
    bahri = bahri_config(cfg);
    for (const auto& s : cfg.scheme_names()) {
      if (s.rfind("kb-", 0) == 0) kb.emplace(s, kirchenbauer_config(cfg, s));
    }
    if (cfg.schemes.kuditipudi) {
      kuditipudi = kuditipudi_config(cfg);
      const auto p = cfg.models_path() / "kuditipudi_references.json";
      require_file(p, "references");
      references = KuditipudiReferences::load(p);
    }
    auto has = [&](const char* d) { return std::find(cfg.detectors.begin(), cfg.detectors.end(), d) != cfg.detectors.end(); };
    if (has("classifier")) {
      const auto p = cfg.models_path() / "classifier.json";
      require_file(p, "train-classifier");
      classifier = NGramClassifier::load(p);
    }
    for (const auto& [name, cmd] : cfg.external_detectors) external.emplace(name, std::make_unique<SubprocessScorer>(cmd));
  }

  double watermark(const std::string& scheme, std::span<const TokenId> t) const {
    if (scheme == "aaronson") return aaronson_score(t, aaronson).length_aware;
    if (scheme == "bahri") return bahri_score(t, bahri).value;
    if (scheme == "kuditipudi") return kuditipudi_score(t, kuditipudi, references).score().value;
    return kirchenbauer_score(t, kb.at(scheme)).z;
  }

  const RunConfig& cfg;
  Models models;
  AaronsonConfig aaronson;
  BahriConfig bahri;
  std::map<std::string, KirchenbauerConfig> kb;
  KuditipudiConfig kuditipudi;
  KuditipudiReferences references;
  std::optional<NGramClassifier> classifier;
  std::map<std::string, std::unique_ptr<SubprocessScorer>> external;
};

TokenStats prefix_stats(const TokenStats& s, std::size_t n) {
  TokenStats out;
  out.log_prob.assign(s.log_prob.begin(), s.log_prob.begin() + static_cast<long>(n));
  out.rank.assign(s.rank.begin(), s.rank.begin() + static_cast<long>(n));
  out.clamped = s.clamped;
  return out;
}

BinocularsTerms prefix_terms(const BinocularsTerms& s, std::size_t n) {
  BinocularsTerms out;
  out.log_p1.assign(s.log_p1.begin(), s.log_p1.begin() + static_cast<long>(n));
  out.cross.assign(s.cross.begin(), s.cross.begin() + static_cast<long>(n));
  out.clamped = s.clamped;
  return out;
}

}  // namespace

std::vector<std::string> score_columns(const RunConfig& cfg) {
  std::vector<std::string> cols;
  for (const auto& s : cfg.scheme_names()) cols.push_back("wm:" + s);
  for (const auto& d : cfg.detectors) cols.push_back("det:" + d);
  for (const auto& [name, _] : cfg.external_detectors) cols.push_back("det:" + name);
  return cols;
}

void cmd_score(const RunConfig& cfg) {
  const auto stems = manifest_stems(cfg);
  if (stems.empty()) throw DataError("no manifests in " + cfg.datasets_path().string() + "; run generate first");
  const Scorers sc(cfg);
  const auto& vocab = sc.models.ours.vocabulary();
  const auto schemes = cfg.scheme_names();
  std::vector<std::size_t> lengths = cfg.eval.lengths;
  std::sort(lengths.begin(), lengths.end());
  std::filesystem::create_directories(cfg.scores_path());
  for (const auto& stem : stems) {
    const auto data = read_manifest(manifest_path(cfg, stem));
    ScoreTable table;
    table.columns = score_columns(cfg);
    for (const auto& r : data) {
      const auto ids = tokenize(r.response, vocab);
      if (ids.empty()) throw DataError("record " + r.id + " has an empty response");
      // Watermark scorers run on the scheme's own positives and on negatives only.
      std::vector<std::string> wm;
      for (const auto& s : schemes) {
        if (!r.positive || r.scheme() == s) wm.push_back(s);
      }
      const auto stats = token_stats(sc.models.ours, ids);
      std::optional<BinocularsTerms> bino;
      if (std::find(cfg.detectors.begin(), cfg.detectors.end(), "binoculars") != cfg.detectors.end()) {
        bino = binoculars_terms(*sc.models.observer_small, *sc.models.observer_large, ids);
      }
      for (std::size_t T : lengths) {
        const auto cut = truncate_tokens(ids, T);
        const std::size_t n = cut.tokens.size();
        ScoreRow row;
        row.record_id = r.id;
        row.prompt_id = r.prompt_id;
        row.dataset = r.dataset;
        row.split = r.split;
        row.source = r.source;
        row.positive = r.positive;
        row.length = T;
        row.tokens = n;
        row.was_short = cut.was_short;
        row.entropy = r.entropy;
        row.bucket = r.bucket;
        for (const auto& c : table.columns) row.values[c] = std::nullopt;
        for (const auto& s : wm) row.values["wm:" + s] = sc.watermark(s, cut.tokens);
        const auto st = prefix_stats(stats, n);
        const std::string text = detokenize(cut.tokens, vocab);
        for (const auto& d : cfg.detectors) {
          double v = 0.0;
          if (d == "llh") v = log_likelihood_score(st).value;
          else if (d == "rank") v = mean_rank_score(st).value;
          else if (d == "lrr") v = lrr_score(st).value;
          else if (d == "binoculars") v = binoculars_score(prefix_terms(*bino, n)).value;
          else v = sc.classifier->score(text);
          row.values["det:" + d] = v;
        }
        for (const auto& [name, scorer] : sc.external) row.values["det:" + name] = scorer->score(text);
        table.rows.push_back(std::move(row));
      }
    }
    table.save(cfg.scores_path() / (stem + ".csv"));
  }
}

}  // namespace wmlab
