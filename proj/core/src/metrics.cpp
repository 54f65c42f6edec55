#include "wmlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wmlab/error.hpp"

namespace wmlab {

Truncated truncate_tokens(std::span<const TokenId> tokens, std::size_t max_tokens) {
  if (max_tokens == 0) throw ValidationError("truncation length must be >= 1");
  Truncated out;
  out.was_short = tokens.size() < max_tokens;
  const auto keep = std::min(tokens.size(), max_tokens);
  out.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

std::string truncate_record(std::string_view text, std::size_t max_tokens, const Vocabulary& vocab,
                            bool* was_short) {
  const auto ids = tokenize(text, vocab);
  auto t = truncate_tokens(ids, max_tokens);
  if (was_short) *was_short = t.was_short;
  if (t.tokens.size() == ids.size()) return std::string(text);
  return detokenize(t.tokens, vocab);
}

// ROC --------------------------------------------------------------------------

RocCurve pareto_front(std::span<const RocPoint> points) {
  std::vector<RocPoint> all(points.begin(), points.end());
  all.push_back({0.0, 0.0, {}});
  all.push_back({1.0, 1.0, {}});
  // Sort by FPR ascending, TPR descending; keep a point when its TPR beats
  // every point with lower or equal FPR.
  std::stable_sort(all.begin(), all.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr > b.tpr;
  });
  RocCurve out;
  double best_tpr = -1.0;
  for (auto& p : all) {
    if (p.tpr > best_tpr) {
      if (!out.points.empty() && out.points.back().fpr == p.fpr) continue;
      best_tpr = p.tpr;
      out.points.push_back(std::move(p));
    }
  }
  return out;
}

double roc_area(const RocCurve& curve, double max_fpr) {
  double area = 0.0;
  double px = 0.0, py = 0.0;
  for (const auto& p : curve.points) {
    if (px >= max_fpr) break;
    if (p.fpr > px) {
      double qx = p.fpr, qy = p.tpr;
      if (qx > max_fpr) {
        qy = py + (qy - py) * (max_fpr - px) / (qx - px);
        qx = max_fpr;
      }
      area += 0.5 * (py + qy) * (qx - px);
      px = qx;
      py = qy;
    } else {
      py = p.tpr;
    }
  }
  if (px < max_fpr) area += py * (max_fpr - px);
  return area;
}

double paucc(const RocCurve& curve, double max_fpr) {
  if (!(max_fpr > 0.0 && max_fpr <= 1.0)) throw ValidationError("max_fpr must lie in (0, 1]");
  const double f = max_fpr;
  const double a = roc_area(curve, f);
  const double lo = 0.5 * f * f;
  return 50.0 * (1.0 + (a - lo) / (f - lo));
}

namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const bool> labels) {
  std::size_t pos = 0;
  for (bool l : labels) pos += l ? 1 : 0;
  return {pos, labels.size() - pos};
}

void require_two_classes(std::size_t pos, std::size_t neg) {
  if (pos == 0 || neg == 0) throw DataError("ROC needs both positive and negative samples");
}

}  // namespace

RocCurve sweep_single_threshold(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  const auto [n_pos, n_neg] = class_counts(labels);
  require_two_classes(n_pos, n_neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, {kInf}});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos), {t}});
  }
  return curve;
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw DataError("percentile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double rank = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (rank - static_cast<double>(lo));
}

std::vector<double> candidate_thresholds(std::span<const double> values, double grid_pct) {
  std::vector<double> out{-kInf, kInf};
  if (grid_pct <= 0.0) {
    out.insert(out.end(), values.begin(), values.end());
  } else {
    if (values.empty()) throw DataError("percentile grid of an empty set");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const auto steps = static_cast<std::size_t>(std::llround(100.0 / grid_pct));
    for (std::size_t s = 0; s <= steps; ++s) {
      const double pct = std::min(100.0, static_cast<double>(s) * grid_pct);
      const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(rank));
      const auto hi = std::min(lo + 1, v.size() - 1);
      out.push_back(v[lo] + (v[hi] - v[lo]) * (rank - static_cast<double>(lo)));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Each record is located on the threshold grids:
//   a  = #{tw <= s_w}, so s_w >= tw[x] iff x < a
//   as = #{tw <  s_w}, so s_w <= tw[x] iff x >= as
//   b  = #{td <= s_d}, so s_d >= td[y] iff y < b
struct Located {
  std::size_t a, as, b;
  bool label;
};

struct Grid {
  std::vector<double> tw, td;
  std::vector<Located> recs;
  std::size_t pos = 0, neg = 0;
};

Grid locate(std::span<const LabeledFeature> records, std::vector<double> tw, std::vector<double> td) {
  Grid g{std::move(tw), std::move(td), {}, 0, 0};
  g.recs.reserve(records.size());
  for (const auto& r : records) {
    if (!std::isfinite(r.f.s_w) || !std::isfinite(r.f.s_d)) throw DataError("cascade features must be finite");
    const auto a = static_cast<std::size_t>(std::upper_bound(g.tw.begin(), g.tw.end(), r.f.s_w) - g.tw.begin());
    const auto as = static_cast<std::size_t>(std::lower_bound(g.tw.begin(), g.tw.end(), r.f.s_w) - g.tw.begin());
    const auto b = static_cast<std::size_t>(std::upper_bound(g.td.begin(), g.td.end(), r.f.s_d) - g.td.begin());
    g.recs.push_back({a, as, b, r.label});
    (r.label ? g.pos : g.neg) += 1;
  }
  return g;
}

// visit(x, y, tp, fp) for every (lambda_w = tw[x], lambda_d = td[y]).
template <class Visit>
void enumerate_1s(const Grid& g, Visit&& visit) {
  const std::size_t A = g.tw.size(), B = g.td.size();
  const std::size_t W = B + 1;
  std::vector<std::size_t> cp((A + 1) * W, 0), cn((A + 1) * W, 0);
  for (const auto& r : g.recs) (r.label ? cp : cn)[r.a * W + r.b] += 1;
  for (std::size_t a = 0; a <= A; ++a) {
    for (std::size_t b = 0; b <= B; ++b) {
      const std::size_t i = a * W + b;
      if (a > 0) {
        cp[i] += cp[i - W];
        cn[i] += cn[i - W];
      }
      if (b > 0) {
        cp[i] += cp[i - 1];
        cn[i] += cn[i - 1];
      }
      if (a > 0 && b > 0) {
        cp[i] -= cp[i - W - 1];
        cn[i] -= cn[i - W - 1];
      }
    }
  }
  // Negative prediction iff a <= x and b <= y.
  for (std::size_t x = 0; x < A; ++x) {
    for (std::size_t y = 0; y < B; ++y) {
      visit(x, y, g.pos - cp[x * W + y], g.neg - cn[x * W + y]);
    }
  }
}

// visit(xl, xh, y, tp, fp) for every lambda_w_low = tw[xl] <= lambda_w_high = tw[xh].
template <class Visit>
void enumerate_2s(const Grid& g, Visit&& visit) {
  const std::size_t A = g.tw.size(), B = g.td.size();
  std::vector<std::vector<const Located*>> by_a(A + 1);
  std::vector<std::size_t> le_pos(A + 1, 0), le_neg(A + 1, 0);  // #{a <= x}
  for (const auto& r : g.recs) {
    by_a[r.a].push_back(&r);
    (r.label ? le_pos : le_neg)[r.a] += 1;
  }
  for (std::size_t x = 1; x <= A; ++x) {
    le_pos[x] += le_pos[x - 1];
    le_neg[x] += le_neg[x - 1];
  }
  std::vector<std::size_t> hp(B + 1), hn(B + 1), sp(B + 1), sn(B + 1);
  for (std::size_t xl = 0; xl < A; ++xl) {
    std::fill(hp.begin(), hp.end(), 0);
    std::fill(hn.begin(), hn.end(), 0);
    for (std::size_t xh = xl; xh < A; ++xh) {
      // In the band: s_w > low and s_w < high, i.e. as > xl and a <= xh.
      for (const auto* r : by_a[xh]) {
        if (r->as > xl) (r->label ? hp : hn)[r->b] += 1;
      }
      // sp[y] = #{band positives with b > y}
      std::size_t accp = 0, accn = 0;
      for (std::size_t b = B + 1; b-- > 0;) {
        sp[b] = accp;
        sn[b] = accn;
        accp += hp[b];
        accn += hn[b];
      }
      const std::size_t high_pos = g.pos - le_pos[xh];
      const std::size_t high_neg = g.neg - le_neg[xh];
      for (std::size_t y = 0; y < B; ++y) visit(xl, xh, y, high_pos + sp[y], high_neg + sn[y]);
    }
  }
}

Grid cascade_grid(std::span<const LabeledFeature> records, double grid_pct) {
  std::vector<double> w, d;
  w.reserve(records.size());
  d.reserve(records.size());
  for (const auto& r : records) {
    w.push_back(r.f.s_w);
    d.push_back(r.f.s_d);
  }
  return locate(records, candidate_thresholds(w, grid_pct), candidate_thresholds(d, grid_pct));
}

}  // namespace

RocCurve sweep_cascade_grid(std::span<const LabeledFeature> records, CascadeKind kind, double grid_pct) {
  const Grid g = cascade_grid(records, grid_pct);
  require_two_classes(g.pos, g.neg);
  // Best TP for each FP count, with the first combination reaching it.
  std::vector<long long> best(g.neg + 1, -1);
  std::vector<std::array<std::size_t, 3>> arg(g.neg + 1);
  if (kind == CascadeKind::OneStage) {
    enumerate_1s(g, [&](std::size_t x, std::size_t y, std::size_t tp, std::size_t fp) {
      if (static_cast<long long>(tp) > best[fp]) {
        best[fp] = static_cast<long long>(tp);
        arg[fp] = {x, y, 0};
      }
    });
  } else {
    enumerate_2s(g, [&](std::size_t xl, std::size_t xh, std::size_t y, std::size_t tp, std::size_t fp) {
      if (static_cast<long long>(tp) > best[fp]) {
        best[fp] = static_cast<long long>(tp);
        arg[fp] = {xl, xh, y};
      }
    });
  }
  std::vector<RocPoint> pts;
  for (std::size_t fp = 0; fp <= g.neg; ++fp) {
    if (best[fp] < 0) continue;
    RocPoint p;
    p.fpr = static_cast<double>(fp) / static_cast<double>(g.neg);
    p.tpr = static_cast<double>(best[fp]) / static_cast<double>(g.pos);
    if (kind == CascadeKind::OneStage) {
      p.thresholds = {g.tw[arg[fp][0]], g.td[arg[fp][1]]};
    } else {
      p.thresholds = {g.tw[arg[fp][0]], g.tw[arg[fp][1]], g.td[arg[fp][2]]};
    }
    pts.push_back(std::move(p));
  }
  RocCurve front = pareto_front(pts);
  if (grid_pct > 0.0) front.grid_pct = grid_pct;
  return front;
}

// Calibrated accuracy ----------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::WatermarkOnly: return "WM Only";
    case Method::DetectorOnly: return "Det Only";
    case Method::OneStage: return "1S";
    case Method::TwoStage: return "2S";
    case Method::LR: return "LR";
    case Method::MLP: return "MLP";
    case Method::Tree: return "Tree";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::WatermarkOnly, Method::DetectorOnly, Method::OneStage, Method::TwoStage,
                 Method::LR, Method::MLP, Method::Tree}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown method '" + s + "'");
}

double Confusion::tpr() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Confusion::tnr() const {
  return tn + fp == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
}

void require_balanced(std::span<const bool> labels) {
  const auto [pos, neg] = class_counts(labels);
  if (pos != neg) {
    throw DataError("test split is not class balanced (" + std::to_string(pos) + " positives, " +
                    std::to_string(neg) + " negatives)");
  }
}

bool CalibratedMethod::predict(const FeaturePair& f) const {
  switch (method) {
    case Method::WatermarkOnly:
    case Method::DetectorOnly:
    case Method::OneStage: return cascade_1s_predict(f, thresholds);
    case Method::TwoStage: return cascade_2s_predict(f, thresholds);
    default: return model->predict(f);
  }
}

Confusion CalibratedMethod::confusion(std::span<const LabeledFeature> records) const {
  Confusion c;
  for (const auto& r : records) {
    const bool p = predict(r.f);
    if (r.label) {
      (p ? c.tp : c.fn) += 1;
    } else {
      (p ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double CalibratedMethod::accuracy(std::span<const LabeledFeature> test) const {
  const auto c = confusion(test);
  if (c.tp + c.fn != c.tn + c.fp) {
    throw DataError("test split is not class balanced (" + std::to_string(c.tp + c.fn) +
                    " positives, " + std::to_string(c.tn + c.fp) + " negatives)");
  }
  return c.balanced_accuracy();
}

namespace {

// Balanced accuracy scaled by 2 * pos * neg, exact in integers.
struct Objective {
  std::size_t pos, neg;
  unsigned long long value(std::size_t tp, std::size_t fp) const {
    return static_cast<unsigned long long>(tp) * neg + static_cast<unsigned long long>(neg - fp) * pos;
  }
};

double single_threshold_best(std::span<const LabeledFeature> cal, bool watermark, std::size_t pos,
                             std::size_t neg) {
  std::vector<std::pair<double, bool>> v;
  v.reserve(cal.size());
  for (const auto& r : cal) v.emplace_back(watermark ? r.f.s_w : r.f.s_d, r.label);
  std::sort(v.begin(), v.end());
  const Objective obj{pos, neg};
  // Threshold v[i].first predicts positive for entries i..end.
  std::size_t tp = pos, fp = neg;
  double best_t = kInf;
  unsigned long long best_v = obj.value(0, 0);
  std::size_t best_tp = 0;
  for (std::size_t i = 0; i < v.size();) {
    const double t = v[i].first;
    const auto val = obj.value(tp, fp);
    if (val > best_v || (val == best_v && tp > best_tp) ||
        (val == best_v && tp == best_tp && t < best_t)) {
      best_v = val;
      best_tp = tp;
      best_t = t;
    }
    while (i < v.size() && v[i].first == t) {
      (v[i].second ? tp : fp) -= 1;
      ++i;
    }
  }
  return best_t;
}

}  // namespace

CalibratedMethod calibrate_accuracy(std::span<const LabeledFeature> calibration, Method method,
                                    const CalibrationOptions& opt) {
  std::size_t pos = 0;
  for (const auto& r : calibration) pos += r.label ? 1 : 0;
  const std::size_t neg = calibration.size() - pos;
  require_two_classes(pos, neg);
  CalibratedMethod out;
  out.method = method;
  switch (method) {
    case Method::WatermarkOnly:
      out.thresholds = {single_threshold_best(calibration, true, pos, neg), kInf, -kInf, kInf};
      break;
    case Method::DetectorOnly:
      out.thresholds = {kInf, single_threshold_best(calibration, false, pos, neg), -kInf, kInf};
      break;
    case Method::OneStage: {
      const Grid g = cascade_grid(calibration, opt.grid_pct);
      const Objective obj{pos, neg};
      unsigned long long best_v = 0;
      std::size_t best_tp = 0;
      bool have = false;
      enumerate_1s(g, [&](std::size_t x, std::size_t y, std::size_t tp, std::size_t fp) {
        const auto val = obj.value(tp, fp);
        if (!have || val > best_v || (val == best_v && tp > best_tp)) {
          have = true;
          best_v = val;
          best_tp = tp;
          out.thresholds = {g.tw[x], g.td[y], -kInf, kInf};
        }
      });
      break;
    }
    case Method::TwoStage: {
      const Grid g = cascade_grid(calibration, opt.grid_pct);
      const Objective obj{pos, neg};
      unsigned long long best_v = 0;
      std::size_t best_tp = 0;
      bool have = false;
      enumerate_2s(g, [&](std::size_t xl, std::size_t xh, std::size_t y, std::size_t tp, std::size_t fp) {
        const auto val = obj.value(tp, fp);
        if (!have || val > best_v || (val == best_v && tp > best_tp)) {
          have = true;
          best_v = val;
          best_tp = tp;
          out.thresholds = {g.tw[xh], g.td[y], g.tw[xl], g.tw[xh]};
        }
      });
      break;
    }
    case Method::LR: out.model = fit_combiner(CombinerKind::Logistic, calibration, opt.seed); break;
    case Method::MLP: out.model = fit_combiner(CombinerKind::Mlp, calibration, opt.seed); break;
    case Method::Tree: out.model = fit_combiner(CombinerKind::Tree, calibration, opt.seed); break;
  }
  out.calibration_accuracy = out.confusion(calibration).balanced_accuracy();
  return out;
}

// Bootstrap --------------------------------------------------------------------

std::vector<std::size_t> class_balanced_resample(std::span<const bool> labels, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (std::size_t k = 0; k < pos.size(); ++k) out.push_back(pos[rng.below(pos.size())]);
  for (std::size_t k = 0; k < neg.size(); ++k) out.push_back(neg[rng.below(neg.size())]);
  return out;
}

std::vector<BootstrapResult> bootstrap_se(std::span<const bool> labels, const MultiMetric& metric,
                                          std::size_t replicates, std::uint64_t seed) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
  std::vector<std::size_t> identity(labels.size());
  std::iota(identity.begin(), identity.end(), 0);
  const auto point = metric(identity);
  std::vector<double> sum(point.size(), 0.0), sum_sq(point.size(), 0.0);
  std::vector<std::vector<double>> values(point.size());
  for (std::size_t r = 0; r < replicates; ++r) {
    Rng rng(derive_seed(seed, "bootstrap", std::to_string(r)));
    const auto idx = class_balanced_resample(labels, rng);
    const auto m = metric(idx);
    if (m.size() != point.size()) throw ValidationError("bootstrap metric changed arity");
    for (std::size_t k = 0; k < m.size(); ++k) values[k].push_back(m[k]);
  }
  std::vector<BootstrapResult> out(point.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    const auto& v = values[k];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[k] = {point[k], std::sqrt(ss / static_cast<double>(v.size() - 1))};
  }
  return out;
}

BootstrapResult bootstrap_se(std::span<const bool> labels,
                             const std::function<double(std::span<const std::size_t>)>& metric,
                             std::size_t replicates, std::uint64_t seed) {
  return bootstrap_se(
      labels, [&](std::span<const std::size_t> idx) { return std::vector<double>{metric(idx)}; },
      replicates, seed)[0];
}

}  // namespace wmlab
