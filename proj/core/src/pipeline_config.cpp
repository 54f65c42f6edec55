#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/pipeline.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ValidationError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
  }
}

std::string format_delta(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", d);
  return buf;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "", {"seed", "work_dir", "corpus_dir", "world", "corpus", "lm", "datasets",
                           "generation", "entropy", "schemes", "detectors", "classifier", "attacks", "eval"});
  RunConfig c;
  if (!doc.contains("seed") || !doc["seed"].is_number_unsigned()) {
    throw ValidationError("config: 'seed' is mandatory and must be a non-negative integer");
  }
  c.seed = doc["seed"].get<std::uint64_t>();
  std::string work = "run";
  read(doc, "work_dir", work, "");
  c.work_dir = base_dir / work;
  if (const char* env = std::getenv("WMLAB_WORK_DIR"); env && *env) c.work_dir = env;
  if (doc.contains("corpus_dir")) c.corpus_dir = base_dir / doc["corpus_dir"].get<std::string>();
  if (const char* env = std::getenv("WMLAB_CORPUS_DIR"); env && *env) c.corpus_dir = env;

  if (doc.contains("world")) {
    const auto& w = doc["world"];
    reject_unknown(w, "world", {"topics", "words_per_topic", "max_branch", "human_drift", "marker_rate", "seed"});
    read(w, "topics", c.world.topics, "world");
    read(w, "words_per_topic", c.world.words_per_topic, "world");
    read(w, "max_branch", c.world.max_branch, "world");
    read(w, "human_drift", c.world.human_drift, "world");
    read(w, "marker_rate", c.world.marker_rate, "world");
    read(w, "seed", c.world.seed, "world");
  }
  if (doc.contains("corpus")) {
    const auto& o = doc["corpus"];
    reject_unknown(o, "corpus", {"docs_per_register", "doc_words_min", "doc_words_max", "max_pieces"});
    read(o, "docs_per_register", c.docs_per_register, "corpus");
    read(o, "doc_words_min", c.doc_words_min, "corpus");
    read(o, "doc_words_max", c.doc_words_max, "corpus");
    read(o, "max_pieces", c.max_pieces, "corpus");
  }
  if (doc.contains("lm")) {
    const auto& o = doc["lm"];
    reject_unknown(o, "lm", {"order", "alpha", "observer_small_order", "observer_large_order"});
    read(o, "order", c.lm_order, "lm");
    read(o, "alpha", c.lm_alpha, "lm");
    read(o, "observer_small_order", c.observer_small_order, "lm");
    read(o, "observer_large_order", c.observer_large_order, "lm");
  }
  if (doc.contains("datasets")) {
    if (!doc["datasets"].is_array()) throw ValidationError("config: 'datasets' must be an array");
    for (const auto& d : doc["datasets"]) {
      reject_unknown(d, "datasets[]", {"name", "split", "prompts", "lead"});
      DatasetSpec s;
      read(d, "name", s.name, "datasets[]");
      read(d, "split", s.split, "datasets[]");
      read(d, "prompts", s.prompts, "datasets[]");
      read(d, "lead", s.lead, "datasets[]");
      c.datasets.push_back(s);
    }
  }
  if (doc.contains("generation")) {
    const auto& o = doc["generation"];
    reject_unknown(o, "generation", {"min_new", "max_new", "plain_per_prompt"});
    read(o, "min_new", c.limits.min_new, "generation");
    read(o, "max_new", c.limits.max_new, "generation");
    read(o, "plain_per_prompt", c.plain_per_prompt, "generation");
  }
  if (doc.contains("entropy")) {
    reject_unknown(doc["entropy"], "entropy", {"horizon"});
    read(doc["entropy"], "horizon", c.entropy_horizon, "entropy");
  }
  if (doc.contains("schemes")) {
    const auto& o = doc["schemes"];
    reject_unknown(o, "schemes", {"aaronson", "kirchenbauer", "bahri", "kuditipudi"});
    auto& s = c.schemes;
    if (o.contains("aaronson")) {
      reject_unknown(o["aaronson"], "schemes.aaronson", {"enabled", "n"});
      read(o["aaronson"], "enabled", s.aaronson, "schemes.aaronson");
      read(o["aaronson"], "n", s.aaronson_n, "schemes.aaronson");
    }
    if (o.contains("kirchenbauer")) {
      reject_unknown(o["kirchenbauer"], "schemes.kirchenbauer", {"deltas", "n", "gamma"});
      read(o["kirchenbauer"], "deltas", s.kirchenbauer_deltas, "schemes.kirchenbauer");
      read(o["kirchenbauer"], "n", s.kirchenbauer_n, "schemes.kirchenbauer");
      read(o["kirchenbauer"], "gamma", s.kirchenbauer_gamma, "schemes.kirchenbauer");
    }
    if (o.contains("bahri")) {
      reject_unknown(o["bahri"], "schemes.bahri", {"enabled", "m", "n"});
      read(o["bahri"], "enabled", s.bahri, "schemes.bahri");
      read(o["bahri"], "m", s.bahri_m, "schemes.bahri");
      read(o["bahri"], "n", s.bahri_n, "schemes.bahri");
    }
    if (o.contains("kuditipudi")) {
      reject_unknown(o["kuditipudi"], "schemes.kuditipudi", {"enabled", "list_length", "n_ref"});
      read(o["kuditipudi"], "enabled", s.kuditipudi, "schemes.kuditipudi");
      read(o["kuditipudi"], "list_length", s.kuditipudi_list_length, "schemes.kuditipudi");
      read(o["kuditipudi"], "n_ref", s.kuditipudi_n_ref, "schemes.kuditipudi");
    }
  }
  if (doc.contains("detectors")) {
    const auto& o = doc["detectors"];
    reject_unknown(o, "detectors", {"builtin", "external"});
    read(o, "builtin", c.detectors, "detectors");
    read(o, "external", c.external_detectors, "detectors");
  }
  if (doc.contains("classifier")) {
    const auto& o = doc["classifier"];
    reject_unknown(o, "classifier", {"train_prompts", "dim", "epochs", "lr", "length_augment"});
    read(o, "train_prompts", c.classifier.train_prompts, "classifier");
    read(o, "dim", c.classifier.dim, "classifier");
    read(o, "epochs", c.classifier.epochs, "classifier");
    read(o, "lr", c.classifier.lr, "classifier");
    read(o, "length_augment", c.classifier.length_augment, "classifier");
  }
  if (doc.contains("attacks")) {
    const auto& o = doc["attacks"];
    reject_unknown(o, "attacks", {"token_replace_p", "paraphrase", "paraphrase_keep", "paraphrase_command", "schemes"});
    read(o, "token_replace_p", c.attacks.token_replace_p, "attacks");
    read(o, "paraphrase", c.attacks.paraphrase, "attacks");
    read(o, "paraphrase_keep", c.attacks.paraphrase_keep, "attacks");
    read(o, "paraphrase_command", c.attacks.paraphrase_command, "attacks");
    read(o, "schemes", c.attacks.schemes, "attacks");
  }
  if (doc.contains("eval")) {
    const auto& o = doc["eval"];
    reject_unknown(o, "eval", {"lengths", "main_length", "max_fpr", "grid_pct", "bootstrap", "bootstrap_pauc",
                               "bootstrap_curves", "negatives", "methods", "calibration_dataset", "test_dataset"});
    auto& e = c.eval;
    read(o, "lengths", e.lengths, "eval");
    read(o, "main_length", e.main_length, "eval");
    read(o, "max_fpr", e.max_fpr, "eval");
    read(o, "grid_pct", e.grid_pct, "eval");
    read(o, "bootstrap", e.bootstrap, "eval");
    read(o, "bootstrap_pauc", e.bootstrap_pauc, "eval");
    read(o, "bootstrap_curves", e.bootstrap_curves, "eval");
    read(o, "negatives", e.negatives, "eval");
    read(o, "methods", e.methods, "eval");
    read(o, "calibration_dataset", e.calibration_dataset, "eval");
    read(o, "test_dataset", e.test_dataset, "eval");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path());
}

std::string RunConfig::to_json() const {
  json schemes_j = {
      {"aaronson", {{"enabled", schemes.aaronson}, {"n", schemes.aaronson_n}}},
      {"kirchenbauer",
       {{"deltas", schemes.kirchenbauer_deltas}, {"n", schemes.kirchenbauer_n}, {"gamma", schemes.kirchenbauer_gamma}}},
      {"bahri", {{"enabled", schemes.bahri}, {"m", schemes.bahri_m}, {"n", schemes.bahri_n}}},
      {"kuditipudi",
       {{"enabled", schemes.kuditipudi},
        {"list_length", schemes.kuditipudi_list_length},
        {"n_ref", schemes.kuditipudi_n_ref}}}};
  json datasets_j = json::array();
  for (const auto& d : datasets) {
    datasets_j.push_back({{"name", d.name}, {"split", d.split}, {"prompts", d.prompts}, {"lead", d.lead}});
  }
  // Paths are left out so relocating a run does not change its digest.
  json doc = {
      {"seed", seed},
      {"world",
       {{"topics", world.topics},
        {"words_per_topic", world.words_per_topic},
        {"max_branch", world.max_branch},
        {"human_drift", world.human_drift},
        {"marker_rate", world.marker_rate},
        {"seed", world.seed}}},
      {"corpus",
       {{"docs_per_register", docs_per_register},
        {"doc_words_min", doc_words_min},
        {"doc_words_max", doc_words_max},
        {"max_pieces", max_pieces}}},
      {"lm",
       {{"order", lm_order},
        {"alpha", lm_alpha},
        {"observer_small_order", observer_small_order},
        {"observer_large_order", observer_large_order}}},
      {"datasets", datasets_j},
      {"generation", {{"min_new", limits.min_new}, {"max_new", limits.max_new}, {"plain_per_prompt", plain_per_prompt}}},
      {"entropy", {{"horizon", entropy_horizon}}},
      {"schemes", schemes_j},
      {"detectors", {{"builtin", detectors}, {"external", external_detectors}}},
      {"classifier",
       {{"train_prompts", classifier.train_prompts},
        {"dim", classifier.dim},
        {"epochs", classifier.epochs},
        {"lr", classifier.lr},
        {"length_augment", classifier.length_augment}}},
      {"attacks",
       {{"token_replace_p", attacks.token_replace_p},
        {"paraphrase", attacks.paraphrase},
        {"paraphrase_keep", attacks.paraphrase_keep},
        {"paraphrase_command", attacks.paraphrase_command},
        {"schemes", attacks.schemes}}},
      {"eval",
       {{"lengths", eval.lengths},
        {"main_length", eval.main_length},
        {"max_fpr", eval.max_fpr},
        {"grid_pct", eval.grid_pct},
        {"bootstrap", eval.bootstrap},
        {"bootstrap_pauc", eval.bootstrap_pauc},
        {"bootstrap_curves", eval.bootstrap_curves},
        {"negatives", eval.negatives},
        {"methods", eval.methods},
        {"calibration_dataset", eval.calibration_dataset},
        {"test_dataset", eval.test_dataset}}}};
  return doc.dump(2) + "\n";
}

std::string RunConfig::digest() const {
  const auto text = to_json();
  return to_hex(sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
}

std::vector<std::string> RunConfig::scheme_names() const {
  std::vector<std::string> out;
  if (schemes.aaronson) out.push_back("aaronson");
  for (double d : schemes.kirchenbauer_deltas) out.push_back("kb-" + format_delta(d));
  if (schemes.bahri) out.push_back("bahri");
  if (schemes.kuditipudi) out.push_back("kuditipudi");
  return out;
}

std::filesystem::path RunConfig::corpus_path() const {
  return corpus_dir.empty() ? work_dir / "corpus" : corpus_dir;
}

void RunConfig::validate() const {
  if (work_dir.empty()) throw ValidationError("config: work_dir is empty");
  if (!corpus_dir.empty() && !std::filesystem::is_directory(corpus_dir)) {
    throw ValidationError("config: corpus_dir " + corpus_dir.string() + " does not exist");
  }
  if (docs_per_register < 1) throw ValidationError("config: corpus.docs_per_register must be >= 1");
  if (doc_words_min < 1 || doc_words_min > doc_words_max) {
    throw ValidationError("config: corpus word range is empty");
  }
  if (lm_order < 1 || observer_small_order < 1 || observer_large_order < 1) {
    throw ValidationError("config: n-gram orders must be >= 1");
  }
  if (!(lm_alpha > 0.0)) throw ValidationError("config: lm.alpha must be > 0");
  if (datasets.empty()) throw ValidationError("config: at least one dataset is required");
  static const std::regex name_re("[a-z0-9_-]+");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (!std::regex_match(d.name, name_re)) {
      throw ValidationError("config: dataset name '" + d.name + "' must match [a-z0-9_-]+");
    }
    if (!names.insert(d.name).second) throw ValidationError("config: duplicate dataset '" + d.name + "'");
    if (d.split != "calibration" && d.split != "test") {
      throw ValidationError("config: dataset '" + d.name + "' needs split calibration or test");
    }
    if (d.prompts < 5) throw ValidationError("config: dataset '" + d.name + "' needs at least 5 prompts");
  }
  if (limits.min_new < 1 || limits.min_new > limits.max_new) {
    throw ValidationError("config: generation needs 1 <= min_new <= max_new");
  }
  if (plain_per_prompt < 1) throw ValidationError("config: generation.plain_per_prompt must be >= 1");
  if (entropy_horizon < 1) throw ValidationError("config: entropy.horizon must be >= 1");
  if (scheme_names().empty()) throw ValidationError("config: no watermarking scheme enabled");
  if (schemes.aaronson_n < 1 || schemes.kirchenbauer_n < 1 || schemes.bahri_n < 1) {
    throw ValidationError("config: scheme n-gram widths must be >= 1");
  }
  if (!(schemes.kirchenbauer_gamma > 0.0 && schemes.kirchenbauer_gamma < 1.0)) {
    throw ValidationError("config: kirchenbauer gamma must be in (0,1)");
  }
  for (double d : schemes.kirchenbauer_deltas) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("config: kirchenbauer deltas must be >= 0");
  }
  if (schemes.bahri_m < 1) throw ValidationError("config: bahri m must be >= 1");
  if (schemes.kuditipudi_list_length < 1 || schemes.kuditipudi_n_ref < 1) {
    throw ValidationError("config: kuditipudi list_length and n_ref must be >= 1");
  }
  static const std::set<std::string> builtin{"llh", "rank", "lrr", "binoculars", "classifier"};
  std::set<std::string> det_names;
  for (const auto& d : detectors) {
    if (!builtin.count(d)) throw ValidationError("config: unknown detector '" + d + "'");
    if (!det_names.insert(d).second) throw ValidationError("config: duplicate detector '" + d + "'");
  }
  for (const auto& [name, cmd] : external_detectors) {
    if (!std::regex_match(name, name_re) || builtin.count(name) || !det_names.insert(name).second) {
      throw ValidationError("config: bad external detector name '" + name + "'");
    }
    if (cmd.empty()) throw ValidationError("config: external detector '" + name + "' has no command");
  }
  if (det_names.empty()) throw ValidationError("config: no detector enabled");
  if (classifier.train_prompts < 2 || classifier.dim < 1 || classifier.epochs < 1 || !(classifier.lr > 0.0)) {
    throw ValidationError("config: classifier settings out of range");
  }
  for (double p : attacks.token_replace_p) {
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("config: attack p must be in [0,100]");
  }
  if (!(attacks.paraphrase_keep >= 0.0 && attacks.paraphrase_keep <= 1.0)) {
    throw ValidationError("config: paraphrase_keep must be in [0,1]");
  }
  const auto schemes_on = scheme_names();
  for (const auto& s : attacks.schemes) {
    if (std::find(schemes_on.begin(), schemes_on.end(), s) == schemes_on.end()) {
      throw ValidationError("config: attack scheme '" + s + "' is not enabled");
    }
  }
  if (eval.lengths.empty()) throw ValidationError("config: eval.lengths is empty");
  for (auto t : eval.lengths) {
    if (t < 1) throw ValidationError("config: eval lengths must be >= 1");
  }
  if (std::find(eval.lengths.begin(), eval.lengths.end(), eval.main_length) == eval.lengths.end()) {
    throw ValidationError("config: eval.main_length must be one of eval.lengths");
  }
  if (!(eval.max_fpr > 0.0 && eval.max_fpr <= 1.0)) throw ValidationError("config: eval.max_fpr must be in (0,1]");
  if (!(eval.grid_pct > 0.0 && eval.grid_pct <= 100.0)) throw ValidationError("config: eval.grid_pct must be in (0,100]");
  if (eval.bootstrap < 2 || eval.bootstrap_pauc < 2 || eval.bootstrap_curves < 2) {
    throw ValidationError("config: bootstrap replicate counts must be >= 2");
  }
  for (const auto& n : eval.negatives) {
    if (n != "theirs" && n != "human") throw ValidationError("config: negatives must be theirs or human");
  }
  if (eval.negatives.empty()) throw ValidationError("config: eval.negatives is empty");
  for (const auto& m : eval.methods) parse_method(m);
  auto find_ds = [&](const std::string& n) -> const DatasetSpec* {
    for (const auto& d : datasets) {
      if (d.name == n) return &d;
    }
    return nullptr;
  };
  const auto* cal = find_ds(eval.calibration_dataset);
  const auto* test = find_ds(eval.test_dataset);
  if (!cal || cal->split != "calibration") {
    throw ValidationError("config: eval.calibration_dataset must name a calibration dataset");
  }
  if (!test || test->split != "test") throw ValidationError("config: eval.test_dataset must name a test dataset");
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto s = ss.str();
  return to_hex(sha256(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
}

// Score tables ---------------------------------------------------------------

namespace {

const std::vector<std::string> kFixedColumns{"record_id", "prompt_id", "dataset", "split", "source", "label",
                                             "length",    "tokens",    "was_short", "entropy", "bucket"};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw DataError("score table: bad number '" + s + "'");
  return v;
}

}  // namespace

std::string ScoreTable::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < kFixedColumns.size(); ++i) out += (i ? "," : "") + kFixedColumns[i];
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (const auto& r : rows) {
    for (const auto* f : {&r.record_id, &r.prompt_id, &r.dataset, &r.split, &r.source}) {
      if (f->find_first_of(",\n") != std::string::npos) throw DataError("score table: field contains a comma");
    }
    out += r.record_id + "," + r.prompt_id + "," + r.dataset + "," + r.split + "," + r.source + ",";
    out += r.positive ? "positive" : "negative";
    out += "," + std::to_string(r.length) + "," + std::to_string(r.tokens) + "," + (r.was_short ? "1" : "0");
    out += "," + (r.entropy ? fmt_double(*r.entropy) : std::string());
    out += "," + (r.bucket ? std::to_string(*r.bucket) : std::string());
    for (const auto& c : columns) {
      out += ",";
      auto it = r.values.find(c);
      if (it != r.values.end() && it->second) out += fmt_double(*it->second);
    }
    out += "\n";
  }
  return out;
}

ScoreTable ScoreTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("score table is empty");
  const auto header = split_csv(line);
  if (header.size() < kFixedColumns.size() ||
      !std::equal(kFixedColumns.begin(), kFixedColumns.end(), header.begin())) {
    throw DataError("score table has an unexpected header");
  }
  ScoreTable t;
  t.columns.assign(header.begin() + static_cast<long>(kFixedColumns.size()), header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw DataError("score table row has the wrong number of fields");
    ScoreRow r;
    r.record_id = f[0];
    r.prompt_id = f[1];
    r.dataset = f[2];
    r.split = f[3];
    r.source = f[4];
    if (f[5] != "positive" && f[5] != "negative") throw DataError("score table: bad label '" + f[5] + "'");
    r.positive = f[5] == "positive";
    r.length = static_cast<std::size_t>(parse_double(f[6]));
    r.tokens = static_cast<std::size_t>(parse_double(f[7]));
    r.was_short = f[8] == "1";
    if (!f[9].empty()) r.entropy = parse_double(f[9]);
    if (!f[10].empty()) r.bucket = static_cast<std::size_t>(parse_double(f[10]));
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& cell = f[kFixedColumns.size() + c];
      r.values[t.columns[c]] = cell.empty() ? std::nullopt : std::optional<double>(parse_double(cell));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

void ScoreTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv();
}

ScoreTable ScoreTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read score table " + path.string() + "; run the score stage first");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

}  // namespace wmlab
