#include "wmlab/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wmlab/attacks.hpp"
#include "wmlab/entropy.hpp"
#include "wmlab/error.hpp"
#include "wmlab/hybrid.hpp"
#include "wmlab/language_model.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/randomness.hpp"
#include "wmlab/tokenizer.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

using nlohmann::json;

namespace {

Bytes from_hex(const std::string& hex) {
  if (hex.size() % 2) throw ValidationError("odd-length hex string");
  Bytes out;
  for (std::size_t i = 0; i < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  return out;
}

Vocabulary vocab_of(const json& in) {
  return Vocabulary(in.at("pieces").get<std::vector<std::string>>(), in.value("byte_fallback", true));
}

std::vector<RocPoint> points_of(const json& in) {
  std::vector<RocPoint> pts;
  for (const auto& p : in) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>(), {}});
  return pts;
}

CascadeThresholds thresholds_of(const json& t) {
  auto num = [](const json& v) {
    if (v.is_string()) return v.get<std::string>() == "-inf" ? -kInf : kInf;
    return v.get<double>();
  };
  CascadeThresholds c;
  if (t.contains("lambda_w")) c.lambda_w = num(t["lambda_w"]);
  if (t.contains("lambda_d")) c.lambda_d = num(t["lambda_d"]);
  if (t.contains("lambda_w_low")) c.lambda_w_low = num(t["lambda_w_low"]);
  if (t.contains("lambda_w_high")) c.lambda_w_high = num(t["lambda_w_high"]);
  return c;
}

std::vector<LabeledFeature> features_of(const json& in) {
  std::vector<LabeledFeature> out;
  const auto& f = in.at("features");
  const auto& l = in.at("labels");
  for (std::size_t i = 0; i < f.size(); ++i) out.push_back({{f[i].at(0).get<double>(), f[i].at(1).get<double>()}, l[i].get<int>() != 0});
  return out;
}

using Op = std::function<json(const json&)>;

const std::map<std::string, Op>& operations() {
  static const std::map<std::string, Op> ops{
      {"prf_uniform",
       [](const json& in) {
         const auto key = WatermarkKey::from_integer(in.at("key").get<std::uint64_t>());
         return json(prf_uniform(key, from_hex(in.at("context_hex"))));
       }},
      {"gamma_cdf", [](const json& in) { return json(gamma_cdf(in.at("shape").get<std::uint64_t>(), in.at("x").get<double>())); }},
      {"irwin_hall_cdf",
       [](const json& in) { return json(irwin_hall_cdf(in.at("k").get<std::uint64_t>(), in.at("x").get<double>())); }},
      {"std_normal_cdf", [](const json& in) { return json(std_normal_cdf(in.at("z").get<double>())); }},
      {"tokenize",
       [](const json& in) { return json(tokenize(in.at("text").get<std::string>(), vocab_of(in))); }},
      {"train_ngram_lm",
       [](const json& in) {
         const auto vocab = vocab_of(in);
         std::vector<TokenSequence> corpus;
         for (const auto& t : in.at("corpus")) corpus.push_back(tokenize(t.get<std::string>(), vocab));
         const auto lm = train_ngram_lm(corpus, vocab, in.at("order").get<std::size_t>(), in.at("alpha").get<double>());
         TokenSequence ctx{Vocabulary::kBos};
         const auto extra = tokenize(in.at("context").get<std::string>(), vocab);
         ctx.insert(ctx.end(), extra.begin(), extra.end());
         const auto d = lm.next_distribution(std::span<const TokenId>(ctx));
         json out = json::object();
         for (const auto& q : in.at("query")) {
           const auto piece = q.get<std::string>();
           const auto id = piece == "</s>" ? Vocabulary::kEos : vocab.find_piece(piece).value();
           out[piece] = d.probs.at(id);
         }
         return out;
       }},
      {"next_token_entropy",
       [](const json& in) { return json(next_token_entropy(in.at("probs").get<std::vector<double>>())); }},
      {"aaronson_score",
       [](const json& in) {
         AaronsonConfig c;
         c.n = in.at("n").get<std::size_t>();
         c.key = WatermarkKey::from_integer(in.at("key").get<std::uint64_t>());
         const auto s = aaronson_score(in.at("tokens").get<TokenSequence>(), c);
         return json{{"sum", s.sum}, {"length_aware", s.length_aware}, {"windows", s.windows}};
       }},
      {"kirchenbauer_is_green",
       [](const json& in) {
         KirchenbauerConfig c;
         c.gamma = in.at("gamma").get<double>();
         c.key = WatermarkKey::from_integer(in.at("key").get<std::uint64_t>());
         return json(kirchenbauer_is_green(in.at("context").get<TokenSequence>(), in.at("token").get<TokenId>(), c));
       }},
      {"kirchenbauer_score",
       [](const json& in) {
         KirchenbauerConfig c;
         c.n = in.at("n").get<std::size_t>();
         c.gamma = in.at("gamma").get<double>();
         c.key = WatermarkKey::from_integer(in.at("key").get<std::uint64_t>());
         const auto s = kirchenbauer_score(in.at("tokens").get<TokenSequence>(), c);
         return json{{"z", s.z}, {"green", s.green}, {"unique_ngrams", s.unique_ngrams}};
       }},
      {"truncate_record",
       [](const json& in) {
         return json(truncate_record(in.at("text").get<std::string>(), in.at("T").get<std::size_t>(), vocab_of(in)));
       }},
      {"pareto_front",
       [](const json& in) {
         json out = json::array();
         for (const auto& p : pareto_front(points_of(in.at("points"))).points) out.push_back({p.fpr, p.tpr});
         return out;
       }},
      {"paucc",
       [](const json& in) {
         return json(paucc(pareto_front(points_of(in.at("points"))), in.at("max_fpr").get<double>()));
       }},
      {"sweep_single_threshold",
       [](const json& in) {
         const auto scores = in.at("scores").get<std::vector<double>>();
         const auto raw = in.at("labels").get<std::vector<int>>();
         auto labels = std::make_unique<bool[]>(raw.size());
         for (std::size_t i = 0; i < raw.size(); ++i) labels[i] = raw[i] != 0;
         return json(roc_area(sweep_single_threshold(scores, std::span<const bool>(labels.get(), raw.size()))));
       }},
      {"cascade_1s_predict",
       [](const json& in) {
         return json(cascade_1s_predict({in.at("s_w").get<double>(), in.at("s_d").get<double>()}, thresholds_of(in.at("t"))));
       }},
      {"cascade_2s_predict",
       [](const json& in) {
         return json(cascade_2s_predict({in.at("s_w").get<double>(), in.at("s_d").get<double>()}, thresholds_of(in.at("t"))));
       }},
      {"hit_rate",
       [](const json& in) {
         std::vector<FeaturePair> f;
         for (const auto& p : in.at("features")) f.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
         const auto r = hit_rate(f, thresholds_of(in.at("t")), parse_cascade_kind(in.at("kind").get<std::string>()),
                                 in.value("cost_w", 0.0), in.value("cost_d", 1.0));
         return json{{"gamma_hit", r.gamma_hit}, {"est_cost_ratio", r.est_cost_ratio}};
       }},
      {"fit_logistic",
       [](const json& in) {
         const auto m = fit_logistic(features_of(in));
         json out = json::array();
         for (const auto& q : in.at("query")) out.push_back(m.predict_proba({q.at(0).get<double>(), q.at(1).get<double>()}));
         return out;
       }},
      {"bucket_by_entropy",
       [](const json& in) {
         std::vector<PromptEntropy> est;
         for (const auto& [id, h] : in.at("entropies").items()) est.push_back({id, h.get<double>()});
         const auto b = bucket_by_entropy(est);
         json out = json::object();
         for (const auto& [id, k] : b.assignment) out[id] = k;
         return out;
       }},
      {"random_token_replacement",
       [](const json& in) {
         const auto tokens = in.at("tokens").get<TokenSequence>();
         const auto out = random_token_replacement(tokens, in.at("p").get<double>(), in.at("vocab_size").get<std::size_t>(),
                                                   in.at("seed").get<std::uint64_t>());
         std::size_t changed = 0;
         for (std::size_t i = 0; i < tokens.size(); ++i) changed += tokens[i] != out[i] ? 1 : 0;
         return json{{"length", out.size()}, {"changed", changed}};
       }},
  };
  return ops;
}

bool matches(const json& actual, const json& expected, double tol, std::string& why) {
  if (expected.is_number_float() || (expected.is_number() && actual.is_number_float())) {
    if (!actual.is_number()) {
      why = "expected a number, got " + actual.dump();
      return false;
    }
    const double a = actual.get<double>(), e = expected.get<double>();
    if (std::fabs(a - e) <= tol || a == e) return true;
    std::ostringstream os;
    os.precision(17);
    os << "got " << a << ", expected " << e << " (tol " << tol << ")";
    why = os.str();
    return false;
  }
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size()) {
      why = "got " + actual.dump() + ", expected " + expected.dump();
      return false;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (!matches(actual[i], expected[i], tol, why)) {
        why = "[" + std::to_string(i) + "] " + why;
        return false;
      }
    }
    return true;
  }
  if (expected.is_object()) {
    for (const auto& [k, v] : expected.items()) {
      if (!actual.contains(k)) {
        why = "missing field " + k;
        return false;
      }
      if (!matches(actual[k], v, tol, why)) {
        why = k + ": " + why;
        return false;
      }
    }
    return true;
  }
  if (actual == expected) return true;
  why = "got " + actual.dump() + ", expected " + expected.dump();
  return false;
}

}  // namespace

std::vector<std::string> fixture_operations() {
  std::vector<std::string> out;
  for (const auto& [name, _] : operations()) out.push_back(name);
  return out;
}

FixtureReport run_fixture_suite(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("fixture directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json" && e.path().filename() != "coverage.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no fixture files in " + dir.string());
  FixtureReport report;
  std::ostringstream text;
  std::set<std::string> exercised;
  for (const auto& path : files) {
    json doc;
    try {
      std::ifstream in(path);
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("malformed fixture " + path.string() + ": " + e.what());
    }
    const auto name = doc.value("name", path.stem().string());
    const auto op_name = doc.at("op").get<std::string>();
    if (!doc.contains("source") || doc["source"].get<std::string>().empty()) {
      throw DataError("fixture " + name + " does not say where its expected values come from");
    }
    const auto it = operations().find(op_name);
    exercised.insert(op_name);
    std::size_t index = 0;
    for (const auto& c : doc.at("cases")) {
      const std::string id = name + "#" + c.value("id", std::to_string(index));
      ++index;
      std::string why;
      bool ok = false;
      if (it == operations().end()) {
        why = "unknown operation " + op_name;
      } else {
        try {
          const auto actual = it->second(c.at("input"));
          ok = matches(actual, c.at("expected"), c.value("tolerance", doc.value("tolerance", 0.0)), why);
        } catch (const std::exception& e) {
          why = std::string("threw: ") + e.what();
        }
      }
      if (ok) {
        ++report.passed;
        text << "PASS " << id << "\n";
      } else {
        ++report.failures;
        report.failed.push_back(id);
        text << "FAIL " << id << ": " << why << "\n";
      }
    }
  }
  const auto cov_path = dir / "coverage.json";
  if (std::filesystem::exists(cov_path)) {
    json cov;
    try {
      std::ifstream in(cov_path);
      cov = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("malformed coverage file: " + std::string(e.what()));
    }
    const auto& props = cov.at("property_tests");
    for (const auto& op : cov.at("operations")) {
      const auto name = op.get<std::string>();
      const std::string id = "coverage#" + name;
      if (exercised.count(name) || (props.contains(name) && !props[name].empty())) {
        ++report.passed;
        text << "PASS " << id << "\n";
      } else {
        ++report.failures;
        report.failed.push_back(id);
        text << "FAIL " << id << ": no fixture or property test\n";
      }
    }
  }
  text << report.passed << " passed, " << report.failures << " failed\n";
  report.text = text.str();
  return report;
}

}  // namespace wmlab
