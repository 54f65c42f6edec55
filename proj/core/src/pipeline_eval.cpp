#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pipeline_internal.hpp"
#include "wmlab/entropy.hpp"
#include "wmlab/error.hpp"
#include "wmlab/hybrid.hpp"
#include "wmlab/metrics.hpp"

namespace wmlab {

using json = nlohmann::ordered_json;
using namespace detail;

namespace {

struct Labels {
  explicit Labels(std::size_t n) : data(std::make_unique<bool[]>(n)), size(n) {}
  std::unique_ptr<bool[]> data;
  std::size_t size;
  std::span<const bool> span() const { return {data.get(), size}; }
};

struct Paired {
  std::vector<LabeledFeature> data;
  std::vector<std::size_t> bucket;
  std::vector<double> entropy;

  Labels labels() const {
    Labels l(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) l.data[i] = data[i].label;
    return l;
  }
};

/// One positive (the scheme's watermarked response) and one negative per
/// prompt, for prompts that have both; ordered by prompt id.
Paired pair_up(const ScoreTable& t, const std::string& scheme, const std::string& det, const std::string& neg,
               std::size_t length, double det_sign) {
  const std::string wm_col = "wm:" + scheme;
  const std::string det_col = "det:" + det;
  const std::string pos_source = "ours-watermarked:" + scheme;
  std::map<std::string, std::pair<const ScoreRow*, const ScoreRow*>> by_prompt;
  for (const auto& r : t.rows) {
    if (r.length != length) continue;
    if (r.source == pos_source) by_prompt[r.prompt_id].first = &r;
    else if (r.source == neg) by_prompt[r.prompt_id].second = &r;
  }
  Paired out;
  auto value = [&](const ScoreRow& r, const std::string& col) -> std::optional<double> {
    auto it = r.values.find(col);
    return it == r.values.end() ? std::nullopt : it->second;
  };
  for (const auto& [pid, pr] : by_prompt) {
    if (!pr.first || !pr.second) continue;
    const auto pw = value(*pr.first, wm_col), pd = value(*pr.first, det_col);
    const auto nw = value(*pr.second, wm_col), nd = value(*pr.second, det_col);
    if (!pw || !pd || !nw || !nd) continue;
    for (const auto* r : {pr.first, pr.second}) {
      const bool pos = r == pr.first;
      out.data.push_back({{pos ? *pw : *nw, det_sign * (pos ? *pd : *nd)}, pos});
      out.bucket.push_back(r->bucket.value_or(0));
      out.entropy.push_back(r->entropy.value_or(0.0));
    }
  }
  return out;
}

std::map<std::string, double> orientation(const ScoreTable& cal, const std::vector<std::string>& detectors,
                                          std::size_t length) {
  std::map<std::string, double> out;
  for (const auto& d : detectors) {
    double sp = 0, sn = 0;
    std::size_t np = 0, nn = 0;
    for (const auto& r : cal.rows) {
      if (r.length != length) continue;
      auto it = r.values.find("det:" + d);
      if (it == r.values.end() || !it->second) continue;
      if (r.positive) {
        sp += *it->second;
        ++np;
      } else {
        sn += *it->second;
        ++nn;
      }
    }
    if (np == 0 || nn == 0) throw DataError("detector " + d + " has no calibration scores for both classes");
    out[d] = sp / static_cast<double>(np) >= sn / static_cast<double>(nn) ? 1.0 : -1.0;
  }
  return out;
}

bool learned(Method m) { return m == Method::LR || m == Method::MLP || m == Method::Tree; }

std::string pair_key(const std::string& neg, const std::string& scheme, const std::string& det) {
  return neg + "__" + scheme + "__" + det;
}

std::filesystem::path hybrid_path(const RunConfig& cfg, const std::string& key, Method m) {
  return cfg.models_path() / "hybrids" / (key + "__" + to_string(m) + ".json");
}

CalibrationOptions calib_options(const RunConfig& cfg, const std::string& key, std::size_t length) {
  return {cfg.eval.grid_pct, derive_seed(cfg.seed, "hybrid", key + "@" + std::to_string(length))};
}

double accuracy_on(const std::vector<char>& pred, const Paired& p, std::span<const std::size_t> idx) {
  Confusion c;
  for (auto i : idx) {
    const bool y = p.data[i].label;
    const bool yhat = pred[i] != 0;
    if (y) (yhat ? c.tp : c.fn) += 1;
    else (yhat ? c.fp : c.tn) += 1;
  }
  return c.balanced_accuracy();
}

std::vector<char> predictions(const CalibratedMethod& m, const Paired& p) {
  std::vector<char> out(p.data.size());
  for (std::size_t i = 0; i < p.data.size(); ++i) out[i] = m.predict(p.data[i].f) ? 1 : 0;
  return out;
}

double pauc_single(const std::vector<double>& score, const Paired& p, std::span<const std::size_t> idx, double f) {
  std::vector<double> s;
  Labels l(idx.size());
  s.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s.push_back(score[idx[k]]);
    l.data[k] = p.data[idx[k]].label;
  }
  const auto raw = sweep_single_threshold(s, l.span());
  return paucc(pareto_front(raw.points), f);
}

double pauc_cascade(const Paired& p, std::span<const std::size_t> idx, CascadeKind kind, double grid, double f) {
  std::vector<LabeledFeature> sub;
  sub.reserve(idx.size());
  for (auto i : idx) sub.push_back(p.data[i]);
  return paucc(sweep_cascade_grid(sub, kind, grid), f);
}

struct PairSpec {
  std::string neg, scheme, det;
};

std::vector<PairSpec> all_pairs(const RunConfig& cfg, const std::vector<std::string>& schemes) {
  std::vector<std::string> dets = cfg.detectors;
  for (const auto& [name, _] : cfg.external_detectors) dets.push_back(name);
  std::vector<PairSpec> out;
  for (const auto& n : cfg.eval.negatives) {
    for (const auto& s : schemes) {
      for (const auto& d : dets) out.push_back({n, s, d});
    }
  }
  return out;
}

std::vector<std::string> detector_names(const RunConfig& cfg) {
  std::vector<std::string> dets = cfg.detectors;
  for (const auto& [name, _] : cfg.external_detectors) dets.push_back(name);
  return dets;
}

std::vector<Method> configured_methods(const RunConfig& cfg) {
  std::vector<Method> out;
  for (const auto& m : cfg.eval.methods) out.push_back(parse_method(m));
  return out;
}

void check_leakage(const ScoreTable& cal, const ScoreTable& test) {
  std::set<std::string> ids, prompts;
  for (const auto& r : cal.rows) {
    if (r.split != "calibration") throw DataError("calibration table holds record " + r.record_id + " tagged " + r.split);
    ids.insert(r.record_id);
    prompts.insert(r.prompt_id);
  }
  for (const auto& r : test.rows) {
    if (r.split != "test") throw DataError("test table holds record " + r.record_id + " tagged " + r.split);
    if (ids.count(r.record_id) || prompts.count(r.prompt_id)) {
      throw DataError("split leakage: " + r.record_id + " appears in both calibration and test data");
    }
  }
}

/// Accuracy of a few methods with bootstrap SEs on one paired test set.
json accuracy_points(const std::vector<Method>& methods, const std::vector<CalibratedMethod>& fitted, const Paired& test,
                     std::size_t replicates, std::uint64_t seed) {
  std::vector<std::vector<char>> preds;
  for (const auto& m : fitted) preds.push_back(predictions(m, test));
  const auto labels = test.labels();
  const auto res = bootstrap_se(
      labels.span(),
      [&](std::span<const std::size_t> idx) {
        std::vector<double> v;
        for (const auto& p : preds) v.push_back(100.0 * accuracy_on(p, test, idx));
        return v;
      },
      replicates, seed);
  json out = json::object();
  for (std::size_t k = 0; k < methods.size(); ++k) out[to_string(methods[k])] = {{"y", res[k].point}, {"se", res[k].se}};
  return out;
}

}  // namespace

void cmd_fit_hybrids(const RunConfig& cfg) {
  const auto cal = ScoreTable::load(cfg.scores_path() / (cfg.eval.calibration_dataset + ".csv"));
  const auto dets = detector_names(cfg);
  const auto sign = orientation(cal, dets, cfg.eval.main_length);
  std::filesystem::create_directories(cfg.models_path() / "hybrids");
  for (const auto& ps : all_pairs(cfg, cfg.scheme_names())) {
    const auto key = pair_key(ps.neg, ps.scheme, ps.det);
    const auto data = pair_up(cal, ps.scheme, ps.det, ps.neg, cfg.eval.main_length, sign.at(ps.det));
    for (auto m : configured_methods(cfg)) {
      if (!learned(m)) continue;
      const auto fitted = calibrate_accuracy(data.data, m, calib_options(cfg, key, cfg.eval.main_length));
      fitted.model->save(hybrid_path(cfg, key, m));
    }
  }
}

void cmd_evaluate(const RunConfig& cfg) {
  const auto cal = ScoreTable::load(cfg.scores_path() / (cfg.eval.calibration_dataset + ".csv"));
  const auto test = ScoreTable::load(cfg.scores_path() / (cfg.eval.test_dataset + ".csv"));
  check_leakage(cal, test);
  const auto dets = detector_names(cfg);
  const auto sign = orientation(cal, dets, cfg.eval.main_length);
  const auto methods = configured_methods(cfg);
  const auto T = cfg.eval.main_length;
  const double f = cfg.eval.max_fpr;
  auto has = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  if (!has(Method::WatermarkOnly) || !has(Method::DetectorOnly)) {
    throw ValidationError("eval.methods must include WM Only and Det Only");
  }

  json accuracy = json::array();
  json pauc = json::array();
  for (const auto& ps : all_pairs(cfg, cfg.scheme_names())) {
    const auto key = pair_key(ps.neg, ps.scheme, ps.det);
    const auto c = pair_up(cal, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
    const auto t = pair_up(test, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
    if (c.data.empty() || t.data.empty()) throw DataError("no paired records for " + key);
    require_balanced(t.labels().span());

    std::vector<CalibratedMethod> fitted;
    for (auto m : methods) {
      if (learned(m)) {
        const auto path = hybrid_path(cfg, key, m);
        if (!std::filesystem::exists(path)) throw DataError("missing " + path.string() + "; run fit-hybrids first");
        CalibratedMethod cm;
        cm.method = m;
        cm.model = CombinerModel::load(path);
        cm.calibration_accuracy = cm.accuracy(c.data);
        fitted.push_back(std::move(cm));
      } else {
        fitted.push_back(calibrate_accuracy(c.data, m, calib_options(cfg, key, T)));
      }
    }
    std::vector<std::vector<char>> preds;
    for (const auto& m : fitted) preds.push_back(predictions(m, t));
    // WM Only and Det Only first, then the combined methods.
    const std::size_t iw = 0, id = 1;
    std::vector<std::size_t> order{
        static_cast<std::size_t>(std::find(methods.begin(), methods.end(), Method::WatermarkOnly) - methods.begin()),
        static_cast<std::size_t>(std::find(methods.begin(), methods.end(), Method::DetectorOnly) - methods.begin())};
    for (std::size_t k = 0; k < methods.size(); ++k) {
      if (methods[k] != Method::WatermarkOnly && methods[k] != Method::DetectorOnly) order.push_back(k);
    }
    const CalibratedMethod* one = nullptr;
    const CalibratedMethod* two = nullptr;
    for (const auto& m : fitted) {
      if (m.method == Method::OneStage) one = &m;
      if (m.method == Method::TwoStage) two = &m;
    }
    const auto labels = t.labels();
    const auto acc = bootstrap_se(
        labels.span(),
        [&](std::span<const std::size_t> idx) {
          std::vector<double> v;
          for (auto k : order) v.push_back(100.0 * accuracy_on(preds[k], t, idx));
          const double base = std::max(v[iw], v[id]);
          for (std::size_t k = 2; k < order.size(); ++k) v.push_back(v[k] - base);
          for (const auto* cm : {one, two}) {
            if (!cm) continue;
            std::vector<FeaturePair> sub;
            for (auto i : idx) sub.push_back(t.data[i].f);
            const auto kind = cm->method == Method::OneStage ? CascadeKind::OneStage : CascadeKind::TwoStage;
            v.push_back(100.0 * hit_rate(sub, cm->thresholds, kind).gamma_hit);
          }
          return v;
        },
        cfg.eval.bootstrap, derive_seed(cfg.seed, "bootstrap-accuracy", key));
    json row = {{"negatives", ps.neg}, {"scheme", ps.scheme}, {"detector", ps.det}, {"length", T},
                {"n_test", t.data.size()}, {"n_calibration", c.data.size()}};
    json values = json::object();
    std::size_t pos = 0;
    for (auto k : order) {
      values[to_string(methods[k])] = {{"y", acc[pos].point}, {"se", acc[pos].se}};
      ++pos;
    }
    for (std::size_t k = 2; k < order.size(); ++k) {
      values[to_string(methods[order[k]]) + "+"] = {{"y", acc[pos].point}, {"se", acc[pos].se}};
      ++pos;
    }
    for (const auto* cm : {one, two}) {
      if (!cm) continue;
      values["gamma " + to_string(cm->method)] = {{"y", acc[pos].point}, {"se", acc[pos].se}};
      ++pos;
    }
    json thresholds = json::object();
    for (const auto& m : fitted) {
      if (learned(m.method)) continue;
      auto enc = [](double x) -> json { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : "-inf"); };
      thresholds[to_string(m.method)] = {{"lambda_w", enc(m.thresholds.lambda_w)},
                                         {"lambda_d", enc(m.thresholds.lambda_d)},
                                         {"lambda_w_low", enc(m.thresholds.lambda_w_low)},
                                         {"lambda_w_high", enc(m.thresholds.lambda_w_high)},
                                         {"calibration_accuracy", m.calibration_accuracy}};
    }
    row["values"] = values;
    row["thresholds"] = thresholds;
    accuracy.push_back(row);

    // Partial AUC on the test split; cascades sweep their own grid.
    std::vector<double> sw, sd;
    for (const auto& r : t.data) {
      sw.push_back(r.f.s_w);
      sd.push_back(r.f.s_d);
    }
    std::vector<std::pair<std::string, std::vector<double>>> learned_scores;
    for (const auto& m : fitted) {
      if (!learned(m.method) || m.method == Method::Tree) continue;
      std::vector<double> s;
      for (const auto& r : t.data) s.push_back(m.model->predict_proba(r.f));
      learned_scores.emplace_back(to_string(m.method), std::move(s));
    }
    std::vector<std::string> names{"WM", "Det"};
    if (has(Method::OneStage)) names.push_back("1S");
    if (has(Method::TwoStage)) names.push_back("2S");
    for (const auto& [n, _] : learned_scores) names.push_back(n);
    const auto pa = bootstrap_se(
        labels.span(),
        [&](std::span<const std::size_t> idx) {
          std::vector<double> v{pauc_single(sw, t, idx, f), pauc_single(sd, t, idx, f)};
          if (has(Method::OneStage)) v.push_back(pauc_cascade(t, idx, CascadeKind::OneStage, cfg.eval.grid_pct, f));
          if (has(Method::TwoStage)) v.push_back(pauc_cascade(t, idx, CascadeKind::TwoStage, cfg.eval.grid_pct, f));
          for (const auto& [_, s] : learned_scores) v.push_back(pauc_single(s, t, idx, f));
          const double base = std::max(v[0], v[1]);
          const std::size_t n = v.size();
          for (std::size_t k = 2; k < n; ++k) v.push_back(v[k] - base);
          return v;
        },
        cfg.eval.bootstrap_pauc, derive_seed(cfg.seed, "bootstrap-pauc", key));
    json pv = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) pv[names[k]] = {{"y", pa[k].point}, {"se", pa[k].se}};
    for (std::size_t k = 2; k < names.size(); ++k) {
      pv[names[k] + "+"] = {{"y", pa[names.size() + k - 2].point}, {"se", pa[names.size() + k - 2].se}};
    }
    pauc.push_back({{"negatives", ps.neg}, {"scheme", ps.scheme}, {"detector", ps.det}, {"length", T},
                    {"max_fpr", f}, {"values", pv}});
  }

  // Curves -------------------------------------------------------------------
  auto curve_methods = [&](std::initializer_list<Method> wanted) {
    std::vector<Method> out;
    for (auto m : wanted) {
      if (has(m)) out.push_back(m);
    }
    return out;
  };
  json curves = json::object();

  json entropy_curve = json::array();
  const auto em = curve_methods({Method::WatermarkOnly, Method::DetectorOnly, Method::LR});
  for (const auto& ps : all_pairs(cfg, cfg.scheme_names())) {
    const auto key = pair_key(ps.neg, ps.scheme, ps.det);
    const auto c = pair_up(cal, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
    const auto t = pair_up(test, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
    std::vector<CalibratedMethod> fitted;
    for (auto m : em) fitted.push_back(calibrate_accuracy(c.data, m, calib_options(cfg, key, T)));
    for (std::size_t b = 0; b < EntropyBuckets::kBuckets; ++b) {
      Paired sub;
      double hsum = 0;
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (t.bucket[i] != b) continue;
        sub.data.push_back(t.data[i]);
        sub.bucket.push_back(b);
        sub.entropy.push_back(t.entropy[i]);
        hsum += t.entropy[i];
      }
      if (sub.data.empty()) continue;
      const auto pts = accuracy_points(em, fitted, sub, cfg.eval.bootstrap_curves,
                                       derive_seed(cfg.seed, "bootstrap-entropy", key + "#" + std::to_string(b)));
      entropy_curve.push_back({{"negatives", ps.neg}, {"scheme", ps.scheme}, {"detector", ps.det}, {"x", b},
                               {"x_value", hsum / static_cast<double>(sub.data.size())},
                               {"n", sub.data.size()}, {"values", pts}});
    }
  }
  curves["entropy"] = entropy_curve;

  json length_curve = json::array();
  const auto lm = curve_methods({Method::WatermarkOnly, Method::DetectorOnly, Method::OneStage, Method::LR});
  std::vector<std::size_t> lengths = cfg.eval.lengths;
  std::sort(lengths.begin(), lengths.end());
  for (const auto& ps : all_pairs(cfg, cfg.scheme_names())) {
    const auto key = pair_key(ps.neg, ps.scheme, ps.det);
    for (auto len : lengths) {
      const auto c = pair_up(cal, ps.scheme, ps.det, ps.neg, len, sign.at(ps.det));
      const auto t = pair_up(test, ps.scheme, ps.det, ps.neg, len, sign.at(ps.det));
      if (c.data.empty() || t.data.empty()) continue;
      std::vector<CalibratedMethod> fitted;
      for (auto m : lm) fitted.push_back(calibrate_accuracy(c.data, m, calib_options(cfg, key, len)));
      const auto pts = accuracy_points(lm, fitted, t, cfg.eval.bootstrap_curves,
                                       derive_seed(cfg.seed, "bootstrap-length", key + "#" + std::to_string(len)));
      length_curve.push_back({{"negatives", ps.neg}, {"scheme", ps.scheme}, {"detector", ps.det}, {"x", len},
                              {"x_value", static_cast<double>(len)}, {"n", t.data.size()}, {"values", pts}});
    }
  }
  curves["length"] = length_curve;

  json corruption_curve = json::array();
  std::vector<std::pair<std::string, double>> levels{{"", 0.0}};
  for (double p : cfg.attacks.token_replace_p) levels.emplace_back("@tr" + p_label(p), p);
  if (cfg.attacks.paraphrase) levels.emplace_back("@para", -1.0);
  std::map<std::string, ScoreTable> tables;
  for (const auto& [suffix, _] : levels) {
    if (suffix.empty()) continue;
    tables[suffix + "cal"] = ScoreTable::load(cfg.scores_path() / (cfg.eval.calibration_dataset + suffix + ".csv"));
    tables[suffix + "test"] = ScoreTable::load(cfg.scores_path() / (cfg.eval.test_dataset + suffix + ".csv"));
  }
  const auto cm_methods = curve_methods({Method::WatermarkOnly, Method::DetectorOnly, Method::LR});
  for (const auto& ps : all_pairs(cfg, cfg.attacks.schemes)) {
    const auto key = pair_key(ps.neg, ps.scheme, ps.det);
    for (const auto& [suffix, p] : levels) {
      const auto& ct = suffix.empty() ? cal : tables.at(suffix + "cal");
      const auto& tt = suffix.empty() ? test : tables.at(suffix + "test");
      const auto c = pair_up(ct, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
      const auto t = pair_up(tt, ps.scheme, ps.det, ps.neg, T, sign.at(ps.det));
      if (c.data.empty() || t.data.empty()) continue;
      std::vector<CalibratedMethod> fitted;
      for (auto m : cm_methods) fitted.push_back(calibrate_accuracy(c.data, m, calib_options(cfg, key + suffix, T)));
      const auto pts = accuracy_points(cm_methods, fitted, t, cfg.eval.bootstrap_curves,
                                       derive_seed(cfg.seed, "bootstrap-corruption", key + suffix));
      corruption_curve.push_back({{"negatives", ps.neg}, {"scheme", ps.scheme}, {"detector", ps.det},
                                  {"x", suffix.empty() ? "tr0" : suffix.substr(1)}, {"x_value", p},
                                  {"n", t.data.size()}, {"values", pts}});
    }
  }
  curves["corruption"] = corruption_curve;

  json digests;
  {
    std::ifstream in(cfg.models_path() / "digests.json");
    if (in) digests = json::parse(in);
  }
  json orient = json::object();
  for (const auto& [d, s] : sign) orient[d] = s;
  json report = {{"format", "wmlab-report"},
                 {"version", 1},
                 {"config_digest", cfg.digest()},
                 {"model_digests", digests},
                 {"calibration_dataset", cfg.eval.calibration_dataset},
                 {"test_dataset", cfg.eval.test_dataset},
                 {"detector_orientation", orient},
                 {"pauc_interpolation", "linear at the max-FPR cut, Pareto front of the operating points"},
                 {"se_multiplier", 2},
                 {"accuracy", accuracy},
                 {"pauc", pauc},
                 {"curves", curves}};
  std::filesystem::create_directories(cfg.reports_path());
  write_text(cfg.reports_path() / "report.json", report.dump(1) + "\n");

  // Flat tables: value and 2-SE half width per column.
  auto flat = [&](const json& rows, const std::vector<std::string>& cols, const std::string& file) {
    std::string out = "negatives,scheme,detector,length";
    for (const auto& c : cols) out += "," + c + "," + c + " 2SE";
    out += "\n";
    char buf[64];
    for (const auto& r : rows) {
      out += r["negatives"].get<std::string>() + "," + r["scheme"].get<std::string>() + "," +
             r["detector"].get<std::string>() + "," + std::to_string(r["length"].get<std::size_t>());
      for (const auto& c : cols) {
        if (!r["values"].contains(c)) {
          out += ",,";
          continue;
        }
        std::snprintf(buf, sizeof buf, ",%.2f,%.2f", r["values"][c]["y"].get<double>(),
                      2.0 * r["values"][c]["se"].get<double>());
        out += buf;
      }
      out += "\n";
    }
    write_text(cfg.reports_path() / file, out);
  };
  std::vector<std::string> acc_cols;
  for (auto m : methods) acc_cols.push_back(to_string(m));
  for (auto m : methods) {
    if (m != Method::WatermarkOnly && m != Method::DetectorOnly) acc_cols.push_back(to_string(m) + "+");
  }
  for (auto m : {Method::OneStage, Method::TwoStage}) {
    if (has(m)) acc_cols.push_back("gamma " + to_string(m));
  }
  flat(accuracy, acc_cols, "accuracy.csv");
  std::vector<std::string> pauc_cols{"WM", "Det"};
  for (auto m : {Method::OneStage, Method::TwoStage, Method::LR, Method::MLP}) {
    if (has(m)) pauc_cols.push_back(to_string(m));
  }
  const std::size_t base_cols = pauc_cols.size();
  for (std::size_t k = 2; k < base_cols; ++k) pauc_cols.push_back(pauc_cols[k] + "+");
  flat(pauc, pauc_cols, "pauc.csv");

  for (const auto& [name, rows] : curves.items()) {
    std::string out = "negatives,scheme,detector,method,x,x_value,n,y,y_2se\n";
    char buf[96];
    for (const auto& r : rows) {
      for (const auto& [m, v] : r["values"].items()) {
        std::snprintf(buf, sizeof buf, ",%.6g,%zu,%.4f,%.4f", r["x_value"].get<double>(), r["n"].get<std::size_t>(),
                      v["y"].get<double>(), 2.0 * v["se"].get<double>());
        out += r["negatives"].get<std::string>() + "," + r["scheme"].get<std::string>() + "," +
               r["detector"].get<std::string>() + "," + m + "," + r["x"].dump() + buf + "\n";
      }
    }
    write_text(cfg.reports_path() / ("curves_" + name + ".csv"), out);
  }
}

void cmd_report(const RunConfig& cfg) {
  std::ifstream in(cfg.reports_path() / "report.json");
  if (!in) throw DataError("missing report.json; run evaluate first");
  const auto report = json::parse(in);
  std::ostringstream md;
  char buf[128];
  md << "# Run report\n\nConfig digest `" << report["config_digest"].get<std::string>() << "`. Calibration on `"
     << report["calibration_dataset"].get<std::string>() << "`, test on `" << report["test_dataset"].get<std::string>()
     << "`. Values are percentages with +-2 SE.\n\n## Balanced accuracy\n\n";
  auto table = [&](const json& rows) {
    std::vector<std::string> cols;
    for (const auto& [c, _] : rows.at(0)["values"].items()) cols.push_back(c);
    md << "| negatives | scheme | detector |";
    for (const auto& c : cols) md << " " << c << " |";
    md << "\n|---|---|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& r : rows) {
      md << "| " << r["negatives"].get<std::string>() << " | " << r["scheme"].get<std::string>() << " | "
         << r["detector"].get<std::string>() << " |";
      for (const auto& c : cols) {
        std::snprintf(buf, sizeof buf, " %.1f +- %.1f |", r["values"][c]["y"].get<double>(),
                      2.0 * r["values"][c]["se"].get<double>());
        md << buf;
      }
      md << "\n";
    }
  };
  if (!report["accuracy"].empty()) table(report["accuracy"]);
  md << "\n## Standardized pAUC (max FPR " << report["pauc"].at(0)["max_fpr"].get<double>() << ")\n\n";
  if (!report["pauc"].empty()) table(report["pauc"]);
  write_text(cfg.reports_path() / "summary.md", md.str());

  // Plot data: one file per curve, method and pair.
  const auto plots = cfg.reports_path() / "plots";
  std::filesystem::remove_all(plots);
  std::map<std::string, std::string> files;
  for (const auto& [name, rows] : report["curves"].items()) {
    for (const auto& r : rows) {
      for (const auto& [m, v] : r["values"].items()) {
        std::string method = m;
        std::replace(method.begin(), method.end(), ' ', '_');
        const auto file = name + "__" + r["negatives"].get<std::string>() + "__" + r["scheme"].get<std::string>() +
                          "__" + r["detector"].get<std::string>() + "__" + method + ".dat";
        auto& body = files[file];
        if (body.empty()) body = "# x y y_2se\n";
        std::snprintf(buf, sizeof buf, "%.6g %.4f %.4f\n", r["x_value"].get<double>(), v["y"].get<double>(),
                      2.0 * v["se"].get<double>());
        body += buf;
      }
    }
  }
  for (const auto& [file, body] : files) write_text(plots / file, body);
}

void cmd_run_all(const RunConfig& cfg) {
  if (cfg.corpus_dir.empty()) cmd_make_corpus(cfg);
  cmd_train_lm(cfg);
  cmd_references(cfg);
  cmd_train_classifier(cfg);
  cmd_generate(cfg);
  cmd_entropy(cfg);
  cmd_attack(cfg);
  cmd_score(cfg);
  cmd_fit_hybrids(cfg);
  cmd_evaluate(cfg);
  cmd_report(cfg);
}

}  // namespace wmlab
