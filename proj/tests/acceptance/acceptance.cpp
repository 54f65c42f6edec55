// Acceptance checks. Prints one PASS/FAIL line per criterion.
// Usage: wmlab_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "toy.hpp"
#include "wmlab/attacks.hpp"
#include "wmlab/detectors.hpp"
#include "wmlab/entropy.hpp"
#include "wmlab/hybrid.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/pipeline.hpp"
#include "wmlab/stats.hpp"
#include "wmlab/watermark.hpp"

using namespace wmlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> s(pos);
  s.insert(s.end(), neg.begin(), neg.end());
  auto y = std::make_unique<bool[]>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = i < pos.size();
  return roc_area(sweep_single_threshold(s, {y.get(), s.size()}));
}

TokenSequence varied_prompt(std::size_t i, std::size_t level_count, std::size_t level) {
  return {static_cast<TokenId>(2 + level + level_count * ((i / 7) % 5)), static_cast<TokenId>(2 + i % 60),
          static_cast<TokenId>(2 + (i / 60) % 60)};
}

KuditipudiReferences references(const LanguageModel& lm, const KuditipudiConfig& cfg, std::size_t length,
                                std::uint64_t seed, bool varied = false) {
  std::vector<TokenSequence> null;
  for (std::size_t i = 0; i < cfg.n_ref + 50; ++i) {
    const auto prompt = varied ? varied_prompt(i + 7919, 1, 0) : toy::Markov::prompt(0);
    null.push_back(sample(lm, prompt, {length, length}, derive_seed(seed, "null", std::to_string(i))));
  }
  const std::vector<std::size_t> lengths{length};
  return kuditipudi_precompute_references(cfg, null, lengths, seed);
}

// 1 ----------------------------------------------------------------------------
Outcome null_calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const toy::Markov lm(64, {1.0}, 1, 2, 0.0);
  AaronsonConfig a;
  a.key = WatermarkKey::from_integer(101);
  BahriConfig b;
  b.m = 64;
  b.key = WatermarkKey::from_integer(102);
  KirchenbauerConfig k;
  k.key = WatermarkKey::from_integer(103);
  auto q = KuditipudiConfig::from_key(WatermarkKey::from_integer(104), 128);
  q.n_ref = 5000;
  const auto refs = references(lm, q, 100, 5, true);
  std::vector<double> sa, sb, sk, sq;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto t = sample(lm, varied_prompt(i, 1, 0), {100, 100}, derive_seed(1, "c1", std::to_string(i)));
    sa.push_back(aaronson_score(t, a).length_aware);
    sb.push_back(bahri_score(t, b).value);
    sk.push_back(kirchenbauer_score(t, k).z);
    sq.push_back(kuditipudi_score(t, q, refs).score().value);
  }
  double mean = 0.0, var = 0.0;
  for (double z : sk) mean += z / sk.size();
  for (double z : sk) var += (z - mean) * (z - mean) / (sk.size() - 1);
  const double sd = std::sqrt(var);
  const double pa = ks_uniform(sa).p_value, pb = ks_uniform(sb).p_value, pq = ks_uniform_grid(sq, q.n_ref).p_value;
  const double secs = seconds_since(t0);
  const bool ok = pa > 0.01 && pb > 0.01 && pq > 0.01 && std::abs(mean) < 0.1 && sd >= 0.9 && sd <= 1.1 && secs < 120;
  return {ok, "KS p aaronson " + fmt("%.3f", pa) + ", bahri " + fmt("%.3f", pb) + ", kuditipudi " + fmt("%.3f", pq) +
                  "; kirchenbauer z mean " + fmt("%.3f", mean) + " sd " + fmt("%.3f", sd) + "; " + fmt("%.1fs", secs)};
}

// 2 ----------------------------------------------------------------------------
Outcome distortion_free() {
  const std::vector<double> p{0.0, 0.0, 0.3, 0.2, 0.15, 0.1, 0.1, 0.07, 0.05, 0.03};
  const MemorylessModel lm(toy::vocab(8), p);
  const std::vector<double> cells(p.begin() + 2, p.end());
  std::map<std::string, std::vector<std::size_t>> counts;
  for (const char* s : {"aaronson", "bahri", "kuditipudi", "kirchenbauer"}) counts[s].assign(8, 0);
  const GenerationLimits one{1, 1};
  for (std::uint64_t key = 0; key < 10000; ++key) {
    const auto wk = WatermarkKey::from_integer(key);
    AaronsonConfig a;
    a.key = wk;
    counts["aaronson"][aaronson_generate(lm, {}, a, one)[0] - 2]++;
    BahriConfig b;
    b.m = 32;
    b.key = wk;
    counts["bahri"][bahri_generate_step(lm, {}, {}, b, derive_seed(2, "bahri", std::to_string(key))) - 2]++;
    const auto q = KuditipudiConfig::from_key(wk, 16);
    counts["kuditipudi"][kuditipudi_generate(lm, {}, q, one, derive_seed(2, "kud", std::to_string(key)))[0] - 2]++;
    KirchenbauerConfig k;
    k.key = wk;
    k.delta = 2.0;
    counts["kirchenbauer"][kirchenbauer_generate(lm, {}, k, one, derive_seed(2, "kb", std::to_string(key)))[0] - 2]++;
  }
  std::map<std::string, double> pv;
  for (const auto& [s, c] : counts) pv[s] = chi_square_gof(c, cells).p_value;
  const bool ok = pv["aaronson"] > 0.01 && pv["bahri"] > 0.01 && pv["kuditipudi"] > 0.01 && pv["kirchenbauer"] < 0.01;
  return {ok, "chi2 p aaronson " + fmt("%.3f", pv["aaronson"]) + ", bahri " + fmt("%.3f", pv["bahri"]) +
                  ", kuditipudi " + fmt("%.3f", pv["kuditipudi"]) + ", kirchenbauer(delta 2) " +
                  fmt("%.2g", pv["kirchenbauer"])};
}

// 3 ----------------------------------------------------------------------------
Outcome separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const toy::Markov lm(64, {1.0}, 3, 4, 0.0);
  const GenerationLimits lim{200, 200};
  double h = 0.0;
  const auto e = estimate_response_entropy(lm, toy::Markov::prompt(0), 8, 200, 9);
  h = e.total / 200.0;
  AaronsonConfig a;
  a.key = WatermarkKey::from_integer(201);
  KirchenbauerConfig k;
  k.key = WatermarkKey::from_integer(202);
  k.delta = 2.0;
  BahriConfig b;
  b.m = 64;
  b.key = WatermarkKey::from_integer(203);
  auto q = KuditipudiConfig::from_key(WatermarkKey::from_integer(204), 128);
  q.n_ref = 200;
  const auto refs = references(lm, q, 200, 7);
  std::map<std::string, std::vector<double>> pos, neg;
  for (std::size_t i = 0; i < 500; ++i) {
    const auto pr = varied_prompt(i, 1, 0);
    const auto seed = [&](const char* s) { return derive_seed(3, s, std::to_string(i)); };
    const auto plain = sample(lm, pr, lim, seed("plain"));
    neg["aaronson"].push_back(aaronson_score(plain, a).length_aware);
    neg["kb-2"].push_back(kirchenbauer_score(plain, k).z);
    neg["bahri"].push_back(bahri_score(plain, b).value);
    neg["kuditipudi"].push_back(kuditipudi_score(plain, q, refs).score().value);
    pos["aaronson"].push_back(aaronson_score(aaronson_generate(lm, pr, a, lim), a).length_aware);
    pos["kb-2"].push_back(kirchenbauer_score(kirchenbauer_generate(lm, pr, k, lim, seed("kb")), k).z);
    pos["bahri"].push_back(bahri_score(bahri_generate(lm, pr, b, lim, seed("bahri")), b).value);
    pos["kuditipudi"].push_back(
        kuditipudi_score(kuditipudi_generate(lm, pr, q, lim, seed("kud")), q, refs).score().value);
  }
  const std::map<std::string, double> floor{{"aaronson", 0.99}, {"kb-2", 0.95}, {"bahri", 0.95}, {"kuditipudi", 0.90}};
  bool ok = h >= 2.0;
  std::string d = "entropy " + fmt("%.2f", h) + " nats/token; AUC";
  for (const auto& [s, f] : floor) {
    const double v = auc(pos[s], neg[s]);
    ok &= v >= f;
    d += " " + s + " " + fmt("%.4f", v);
  }
  const double secs = seconds_since(t0);
  ok &= secs < 600;
  return {ok, d + "; " + fmt("%.1fs", secs)};
}

// 4 ----------------------------------------------------------------------------
std::vector<LabeledFeature> hybrid_fixture(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledFeature> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i % 2 == 0;
    const double w = (y && rng.unit() < 0.5) ? 2.5 + rng.normal() : rng.normal();
    out.push_back({{w, rng.normal() + (y ? 1.0 : 0.0)}, y});
  }
  return out;
}

// Largest class fraction strictly between neighbouring grid thresholds.
double cell_mass(std::span<const LabeledFeature> d, bool w, bool label, double grid_pct) {
  std::vector<double> v;
  for (const auto& r : d) v.push_back(w ? r.f.s_w : r.f.s_d);
  const auto t = candidate_thresholds(v, grid_pct);
  std::size_t cls = 0, worst = 0;
  for (const auto& r : d) cls += r.label == label;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    std::size_t c = 0;
    for (const auto& r : d) {
      const double x = w ? r.f.s_w : r.f.s_d;
      c += r.label == label && x > t[k] && x < t[k + 1];
    }
    worst = std::max(worst, c);
  }
  return static_cast<double>(worst) / static_cast<double>(cls);
}

bool dominates(const RocCurve& front, const RocCurve& single, double df, double dt) {
  for (const auto& q : single.points) {
    bool found = false;
    for (const auto& r : front.points) found |= r.fpr <= q.fpr + df + 1e-12 && r.tpr >= q.tpr - dt - 1e-12;
    if (!found) return false;
  }
  return true;
}

Outcome hybrid_dominance() {
  const auto d = hybrid_fixture(500, 4);
  std::vector<double> w, s;
  auto y = std::make_unique<bool[]>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    w.push_back(d[i].f.s_w);
    s.push_back(d[i].f.s_d);
    y[i] = d[i].label;
  }
  const auto fw = sweep_single_threshold(w, {y.get(), d.size()});
  const auto fd = sweep_single_threshold(s, {y.get(), d.size()});
  bool exact = true, grid = true;
  double df = 0.0, dt = 0.0;
  for (bool feat : {true, false}) {
    df = std::max(df, cell_mass(d, feat, false, 1.0));
    dt = std::max(dt, cell_mass(d, feat, true, 1.0));
  }
  for (auto kind : {CascadeKind::OneStage, CascadeKind::TwoStage}) {
    const auto full = sweep_cascade_grid(d, kind, 0.0);
    exact &= dominates(full, fw, 0, 0) && dominates(full, fd, 0, 0);
    const auto coarse = sweep_cascade_grid(d, kind, 1.0);
    grid &= dominates(coarse, fw, df, dt) && dominates(coarse, fd, df, dt);
  }
  return {exact && grid, std::string("full granularity ") + (exact ? "dominates" : "violated") + "; 1% grid " +
                             (grid ? "dominates" : "violated") + " within cell (" + fmt("%.3f", df) + " FPR, " +
                             fmt("%.3f", dt) + " TPR)"};
}

// 5 ----------------------------------------------------------------------------
struct PairedSet {
  std::vector<LabeledFeature> rows;
  std::vector<double> entropy;  // per row
};

PairedSet entropy_dataset(const toy::Markov& ours, const toy::Markov& theirs, const char* name, std::size_t prompts,
                          Rng& det) {
  PairedSet out;
  AaronsonConfig a;
  a.key = WatermarkKey::from_integer(501);
  const GenerationLimits lim{100, 100};
  for (std::size_t i = 0; i < prompts; ++i) {
    const auto pr = varied_prompt(i, ours.levels(), i % ours.levels());
    const auto seed = [&](const char* s) { return derive_seed(5, std::string(name) + s, std::to_string(i)); };
    const double h = estimate_response_entropy(ours, pr, 4, 100, seed("h")).total;
    const auto wm = aaronson_generate(ours, pr, a, lim);
    const auto neg = sample(theirs, pr, lim, seed("neg"));
    out.rows.push_back({{aaronson_score(wm, a).length_aware, det.normal() + 1.4}, true});
    out.rows.push_back({{aaronson_score(neg, a).length_aware, det.normal()}, false});
    out.entropy.push_back(h);
    out.entropy.push_back(h);
  }
  return out;
}

std::vector<double> per_quintile(const CalibratedMethod& m, const PairedSet& test) {
  std::vector<PromptEntropy> est;
  for (std::size_t i = 0; i < test.rows.size(); i += 2) est.push_back({std::to_string(100000 + i), test.entropy[i]});
  const auto buckets = bucket_by_entropy(est);
  std::vector<std::vector<LabeledFeature>> by(EntropyBuckets::kBuckets);
  for (std::size_t i = 0; i < test.rows.size(); i += 2) {
    const auto b = buckets.bucket_of(std::to_string(100000 + i));
    by[b].push_back(test.rows[i]);
    by[b].push_back(test.rows[i + 1]);
  }
  std::vector<double> acc;
  for (const auto& rows : by) acc.push_back(100.0 * m.accuracy(rows));
  return acc;
}

Outcome entropy_trend() {
  const std::vector<double> temps{0.12, 0.18, 0.25, 0.35, 0.5, 0.7, 1.0};
  const toy::Markov ours(64, temps, 11, 12, 0.0), theirs(64, temps, 11, 13, 0.5);
  Rng det(55);
  const auto cal = entropy_dataset(ours, theirs, "cal", 500, det);
  const auto test = entropy_dataset(ours, theirs, "test", 500, det);
  const auto wm = per_quintile(calibrate_accuracy(cal.rows, Method::WatermarkOnly), test);
  const auto lr = per_quintile(calibrate_accuracy(cal.rows, Method::LR), test);
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t k = 1; k < wm.size(); ++k) {
    if (wm[k] < wm[k - 1]) {
      ++inversions;
      small &= wm[k - 1] - wm[k] <= 2.0;
    }
  }
  const double gain = *std::min_element(lr.begin(), lr.end()) - *std::min_element(wm.begin(), wm.end());
  std::string d = "WM Only by quintile";
  for (double v : wm) d += " " + fmt("%.1f", v);
  d += "; LR";
  for (double v : lr) d += " " + fmt("%.1f", v);
  d += "; worst-quintile gain " + fmt("%.1f", gain);
  return {inversions <= 1 && small && gain >= 3.0, d};
}

// 6 and 7 share a small two-model world --------------------------------------
struct World {
  std::vector<double> temps{0.5, 0.8, 1.2};
  toy::Markov ours{64, temps, 21, 22, 0.0};
  toy::Markov theirs{64, temps, 21, 23, 0.6};
  toy::Markov obs_a{64, temps, 21, 24, 0.9};
  toy::Markov obs_b{64, temps, 21, 25, 0.8};
  NGramClassifier clf;

  World() {
    std::vector<std::string> p, n;
    const GenerationLimits lim{100, 100};
    for (std::size_t i = 0; i < 300; ++i) {
      const auto pr = varied_prompt(i + 7000, temps.size(), i % temps.size());
      p.push_back(detokenize(sample(ours, pr, lim, derive_seed(6, "clf+", std::to_string(i))), ours.vocabulary()));
      n.push_back(detokenize(sample(theirs, pr, lim, derive_seed(6, "clf-", std::to_string(i))), ours.vocabulary()));
    }
    NGramClassifierConfig c;
    c.epochs = 10;
    clf = train_ngram_classifier(p, n, c);
  }
};

Outcome corruption(const World& w) {
  AaronsonConfig a;
  a.key = WatermarkKey::from_integer(601);
  const auto& v = w.ours.vocabulary();
  const GenerationLimits lim{100, 100};
  struct Text {
    std::string pos, neg;
  };
  auto make = [&](const char* name, std::size_t off) {
    std::vector<Text> out;
    for (std::size_t i = 0; i < 300; ++i) {
      const auto pr = varied_prompt(i + off, w.temps.size(), i % w.temps.size());
      out.push_back({detokenize(aaronson_generate(w.ours, pr, a, lim), v),
                     detokenize(sample(w.theirs, pr, lim, derive_seed(6, name, std::to_string(i))), v)});
    }
    return out;
  };
  const auto cal = make("cal", 0), test = make("test", 3000);
  auto features = [&](const std::vector<Text>& texts, double p, const char* split) {
    std::vector<LabeledFeature> rows;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto attacked =
          random_token_replacement(texts[i].pos, v, p, derive_seed(derive_seed(6, "attack", split), "tr", std::to_string(i)));
      rows.push_back({{aaronson_score(tokenize(attacked, v), a).length_aware, w.clf.score(attacked)}, true});
      rows.push_back({{aaronson_score(tokenize(texts[i].neg, v), a).length_aware, w.clf.score(texts[i].neg)}, false});
    }
    return rows;
  };
  std::vector<double> wm;
  std::map<int, double> lr;
  for (int p : {0, 10, 20, 30, 40}) {
    const auto c = features(cal, p, "calibration"), t = features(test, p, "test");
    wm.push_back(100.0 * calibrate_accuracy(c, Method::WatermarkOnly).accuracy(t));
    if (p == 0 || p == 20) lr[p] = 100.0 * calibrate_accuracy(c, Method::LR).accuracy(t);
  }
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t k = 1; k < wm.size(); ++k) {
    if (wm[k] > wm[k - 1]) {
      ++inversions;
      small &= wm[k] - wm[k - 1] <= 1.0;
    }
  }
  std::string d = "WM Only at p=0..40:";
  for (double x : wm) d += " " + fmt("%.1f", x);
  d += "; LR p=0 " + fmt("%.1f", lr[0]) + ", p=20 " + fmt("%.1f", lr[20]);
  return {inversions <= 1 && small && std::abs(lr[0] - lr[20]) <= 5.0, d};
}

bool g_verbose = false;

Outcome combiner_sanity(const World& w) {
  AaronsonConfig a;
  a.key = WatermarkKey::from_integer(701);
  KirchenbauerConfig k;
  k.key = WatermarkKey::from_integer(702);
  k.delta = 2.0;
  BahriConfig b;
  b.m = 64;
  b.key = WatermarkKey::from_integer(703);
  auto q = KuditipudiConfig::from_key(WatermarkKey::from_integer(704), 64);
  q.n_ref = 200;
  const auto refs = references(w.ours, q, 100, 8);
  const auto& v = w.ours.vocabulary();
  const GenerationLimits lim{100, 100};
  const std::vector<std::string> schemes{"aaronson", "kb-2", "bahri", "kuditipudi"};
  const std::vector<std::string> dets{"llh", "rank", "lrr", "binoculars", "classifier"};
  auto wm_score = [&](const std::string& s, const TokenSequence& t) {
    if (s == "aaronson") return aaronson_score(t, a).length_aware;
    if (s == "kb-2") return kirchenbauer_score(t, k).z;
    if (s == "bahri") return bahri_score(t, b).value;
    return kuditipudi_score(t, q, refs).score().value;
  };
  auto det_scores = [&](const TokenSequence& t) {
    const auto st = token_stats(w.ours, t);
    return std::vector<double>{log_likelihood_score(st).value, mean_rank_score(st).value, lrr_score(st).value,
                               binoculars_score(w.obs_a, w.obs_b, t).value, w.clf.score(detokenize(t, v))};
  };
  // rows[scheme][detector]
  using Table = std::map<std::string, std::map<std::string, std::vector<LabeledFeature>>>;
  auto build = [&](const char* name, std::size_t off) {
    Table tab;
    for (std::size_t i = 0; i < 300; ++i) {
      const auto pr = varied_prompt(i + off, w.temps.size(), i % w.temps.size());
      const auto seed = [&](const std::string& s) { return derive_seed(7, name + s, std::to_string(i)); };
      const auto neg = sample(w.theirs, pr, lim, seed("neg"));
      const auto dn = det_scores(neg);
      for (const auto& s : schemes) {
        TokenSequence pos;
        if (s == "aaronson") pos = aaronson_generate(w.ours, pr, a, lim);
        else if (s == "kb-2") pos = kirchenbauer_generate(w.ours, pr, k, lim, seed(s));
        else if (s == "bahri") pos = bahri_generate(w.ours, pr, b, lim, seed(s));
        else pos = kuditipudi_generate(w.ours, pr, q, lim, seed(s));
        const auto dp = det_scores(pos);
        const double wp = wm_score(s, pos), wn = wm_score(s, neg);
        for (std::size_t j = 0; j < dets.size(); ++j) {
          tab[s][dets[j]].push_back({{wp, dp[j]}, true});
          tab[s][dets[j]].push_back({{wn, dn[j]}, false});
        }
      }
    }
    return tab;
  };
  auto cal = build("beta", 0);
  auto test = build("alpha", 5000);
  bool ok = true;
  double worst = 1e9;
  std::string worst_pair;
  for (const auto& s : schemes) {
    for (const auto& dname : dets) {
      auto& c = cal[s][dname];
      auto& t = test[s][dname];
      double mp = 0.0, mn = 0.0;
      for (const auto& r : c) (r.label ? mp : mn) += r.f.s_d;
      if (mp < mn) {
        for (auto& r : c) r.f.s_d = -r.f.s_d;
        for (auto& r : t) r.f.s_d = -r.f.s_d;
      }
      const double wm = 100.0 * calibrate_accuracy(c, Method::WatermarkOnly).accuracy(t);
      const double de = 100.0 * calibrate_accuracy(c, Method::DetectorOnly).accuracy(t);
      const double lr = 100.0 * calibrate_accuracy(c, Method::LR).accuracy(t);
      const double margin = lr - std::max(wm, de);
      if (g_verbose) std::fprintf(stderr, "  %s/%s WM %.1f Det %.1f LR %.1f\n", s.c_str(), dname.c_str(), wm, de, lr);
      ok &= margin >= -1.0;
      if (margin < worst) {
        worst = margin;
        worst_pair = s + "/" + dname + " (LR " + fmt("%.1f", lr) + ", WM " + fmt("%.1f", wm) + ", Det " + fmt("%.1f", de) + ")";
      }
    }
  }
  return {ok, "20 pairs; smallest LR margin " + fmt("%.1f", worst) + " points at " + worst_pair};
}

// 8 ----------------------------------------------------------------------------
Outcome metric_consistency() {
  RocCurve diag{{{0, 0, {}}, {1, 1, {}}}, {}};
  RocCurve perfect{{{0, 0, {}}, {0, 1, {}}, {1, 1, {}}}, {}};
  const bool pauc_ok = std::abs(paucc(diag) - 50.0) <= 0.01 && std::abs(paucc(perfect) - 100.0) <= 0.01;
  Rng rng(8);
  double max_err = 0.0;
  bool acc_ok = true, boot_ok = true;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 100 + 10 * rep;
    std::vector<double> s;
    auto y = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i % 2 == 0;
      s.push_back(std::round((rng.normal() + (y[i] ? 0.7 : 0.0)) * 4) / 4);
    }
    const std::span<const bool> labels(y.get(), n);
    max_err = std::max(max_err, std::abs(roc_area(sweep_single_threshold(s, labels)) - oracle::mann_whitney_auc(s, labels)));
    std::vector<LabeledFeature> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({{s[i], rng.normal()}, y[i]});
    const auto m = calibrate_accuracy(rows, Method::OneStage);
    auto pred = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = m.predict(rows[i].f);
    acc_ok &= m.accuracy(rows) == oracle::balanced_accuracy(oracle::confusion({pred.get(), n}, labels));
    bootstrap_se(
        labels,
        [&](std::span<const std::size_t> idx) {
          std::size_t pos = 0;
          for (auto i : idx) pos += y[i];
          boot_ok &= idx.size() == n && pos == n / 2;
          return 0.0;
        },
        50, rep);
  }
  const bool ok = pauc_ok && max_err <= 1e-12 && acc_ok && boot_ok;
  return {ok, "paucc diagonal " + fmt("%.4f", paucc(diag)) + ", perfect " + fmt("%.4f", paucc(perfect)) +
                  "; AUC max error " + fmt("%.2g", max_err) + "; accuracy " + (acc_ok ? "exact" : "mismatch") +
                  "; bootstrap " + (boot_ok ? "balanced" : "unbalanced")};
}

// 9 ----------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path config = fs::path(WMLAB_SOURCE_DIR) / "tests/data/tiny.json";
  std::vector<fs::path> dirs;
  for (const char* tag : {"a", "b"}) {
    auto cfg = RunConfig::load(config);
    cfg.work_dir = fs::temp_directory_path() / (std::string("wmlab_determinism_") + tag);
    cfg.corpus_dir.clear();
    fs::remove_all(cfg.work_dir);
    cmd_run_all(cfg);
    dirs.push_back(cfg.work_dir);
  }
  std::size_t compared = 0, differing = 0;
  std::string first;
  for (const char* sub : {"datasets", "scores", "reports"}) {
    for (const auto& e : fs::recursive_directory_iterator(dirs[0] / sub)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), dirs[0]);
      ++compared;
      if (slurp(e.path()) != slurp(dirs[1] / rel)) {
        ++differing;
        if (first.empty()) first = rel.string();
      }
    }
  }
  for (const auto& d : dirs) fs::remove_all(d);
  return {differing == 0 && compared > 0,
          std::to_string(compared) + " manifests, score tables and reports compared, " + std::to_string(differing) +
              " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "-v") g_verbose = true;
    else only.insert(std::atoi(argv[i]));
  }
  std::unique_ptr<World> world;
  auto get_world = [&]() -> const World& {
    if (!world) world = std::make_unique<World>();
    return *world;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"null calibration", null_calibration},
      {"distortion-freeness", distortion_free},
      {"watermark separation", separation},
      {"hybrid dominance", hybrid_dominance},
      {"entropy trend", entropy_trend},
      {"corruption robustness", [&] { return corruption(get_world()); }},
      {"combiner sanity", [&] { return combiner_sanity(get_world()); }},
      {"metric self-consistency", metric_consistency},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, checks[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
