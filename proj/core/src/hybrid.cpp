#include "wmlab/hybrid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

std::string to_string(CascadeKind kind) { return kind == CascadeKind::OneStage ? "1S" : "2S"; }

CascadeKind parse_cascade_kind(const std::string& s) {
  if (s == "1S") return CascadeKind::OneStage;
  if (s == "2S") return CascadeKind::TwoStage;
  throw ValidationError("unknown cascade kind '" + s + "' (expected 1S or 2S)");
}

bool cascade_1s_predict(const FeaturePair& f, const CascadeThresholds& t) {
  return f.s_w >= t.lambda_w || f.s_d >= t.lambda_d;
}

bool cascade_2s_predict(const FeaturePair& f, const CascadeThresholds& t) {
  if (t.lambda_w_low > t.lambda_w_high) {
    throw ValidationError("2S thresholds need lambda_w_low <= lambda_w_high");
  }
  if (f.s_w >= t.lambda_w_high) return true;
  if (f.s_w <= t.lambda_w_low) return false;
  return f.s_d >= t.lambda_d;
}

bool cascade_predict(CascadeKind kind, const FeaturePair& f, const CascadeThresholds& t) {
  return kind == CascadeKind::OneStage ? cascade_1s_predict(f, t) : cascade_2s_predict(f, t);
}

std::string to_string(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::Logistic: return "LR";
    case CombinerKind::Mlp: return "MLP";
    case CombinerKind::Tree: return "Tree";
  }
  return "?";
}

CombinerKind parse_combiner_kind(const std::string& s) {
  if (s == "LR") return CombinerKind::Logistic;
  if (s == "MLP") return CombinerKind::Mlp;
  if (s == "Tree") return CombinerKind::Tree;
  throw ValidationError("unknown combiner '" + s + "' (expected LR, MLP or Tree)");
}

ZNorm ZNorm::fit(std::span<const LabeledFeature> data) {
  if (data.empty()) throw DataError("cannot normalize an empty calibration set");
  ZNorm z;
  const double n = static_cast<double>(data.size());
  for (int k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (const auto& d : data) mean += k == 0 ? d.f.s_w : d.f.s_d;
    mean /= n;
    double var = 0.0;
    for (const auto& d : data) {
      const double x = (k == 0 ? d.f.s_w : d.f.s_d) - mean;
      var += x * x;
    }
    var /= n;
    z.mean[k] = mean;
    z.std[k] = std::sqrt(var);
    z.active[k] = z.std[k] > 0.0 && std::isfinite(z.std[k]);
    if (!z.active[k]) z.std[k] = 1.0;
  }
  return z;
}

std::vector<double> ZNorm::apply(const FeaturePair& f) const {
  std::vector<double> out;
  out.reserve(2);
  if (active[0]) out.push_back((f.s_w - mean[0]) / std[0]);
  if (active[1]) out.push_back((f.s_d - mean[1]) / std[1]);
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_both_labels(std::span<const LabeledFeature> data, const char* what) {
  const auto pos = std::count_if(data.begin(), data.end(), [](const auto& d) { return d.label; });
  if (pos == 0 || pos == static_cast<long>(data.size())) {
    throw DataError(std::string(what) + " needs both labels in the calibration data");
  }
}

void check_finite(std::span<const LabeledFeature> data) {
  for (const auto& d : data) {
    if (!std::isfinite(d.f.s_w) || !std::isfinite(d.f.s_d)) {
      throw DataError("combiner features must be finite");
    }
  }
}

CombinerModel start_model(CombinerKind kind, std::span<const LabeledFeature> data) {
  check_finite(data);
  CombinerModel m;
  m.kind = kind;
  m.norm = ZNorm::fit(data);
  if (!m.norm.active[0]) m.flags.push_back("dropped s_w: zero variance");
  if (!m.norm.active[1]) m.flags.push_back("dropped s_d: zero variance");
  return m;
}

Eigen::MatrixXd design(const CombinerModel& m, std::span<const LabeledFeature> data) {
  const auto d = m.norm.dims();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = m.norm.apply(data[i].f);
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = z[k];
  }
  return x;
}

// MLP forward pass on column-major batches (features x batch).
struct MlpNet {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2;
  double b3 = 0.0;

  Eigen::RowVectorXd logits(const Eigen::MatrixXd& x, Eigen::MatrixXd* h1 = nullptr,
                            Eigen::MatrixXd* h2 = nullptr) const {
    Eigen::MatrixXd a1 = ((w1 * x).colwise() + b1).cwiseMax(0.0);
    Eigen::MatrixXd a2 = ((w2 * a1).colwise() + b2).cwiseMax(0.0);
    Eigen::RowVectorXd out = (w3 * a2).array() + b3;
    if (h1) *h1 = std::move(a1);
    if (h2) *h2 = std::move(a2);
    return out;
  }
};

MlpNet to_net(const MlpParams& p) {
  MlpNet net;
  const auto h = static_cast<Eigen::Index>(p.hidden);
  const auto in = static_cast<Eigen::Index>(p.inputs);
  net.w1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      p.w1.data(), h, in);
  net.w2 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      p.w2.data(), h, h);
  net.w3 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      p.w3.data(), 1, h);
  net.b1 = Eigen::Map<const Eigen::VectorXd>(p.b1.data(), h);
  net.b2 = Eigen::Map<const Eigen::VectorXd>(p.b2.data(), h);
  net.b3 = p.b3;
  return net;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

void store_net(const MlpNet& net, MlpParams& p) {
  p.w1 = flatten(net.w1);
  p.w2 = flatten(net.w2);
  p.w3 = flatten(net.w3);
  p.b1.assign(net.b1.data(), net.b1.data() + net.b1.size());
  p.b2.assign(net.b2.data(), net.b2.data() + net.b2.size());
  p.b3 = net.b3;
}

const TreeNode& tree_leaf(const TreeParams& t, const std::vector<double>& z) {
  std::size_t i = 0;
  while (t.nodes[i].feature >= 0) {
    const auto& n = t.nodes[i];
    i = static_cast<std::size_t>(z[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return t.nodes[i];
}

std::size_t depth_from(const TreeParams& t, int node) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return 0;
  return 1 + std::max(depth_from(t, n.left), depth_from(t, n.right));
}

}  // namespace

double CombinerModel::predict_proba(const FeaturePair& f) const {
  const auto z = norm.apply(f);
  switch (kind) {
    case CombinerKind::Logistic: {
      const auto& p = std::get<LogisticParams>(params);
      double eta = p.b;
      for (std::size_t k = 0; k < z.size(); ++k) eta += p.w[k] * z[k];
      return sigmoid(eta);
    }
    case CombinerKind::Mlp: {
      const auto net = to_net(std::get<MlpParams>(params));
      Eigen::VectorXd x(static_cast<Eigen::Index>(z.size()));
      for (std::size_t k = 0; k < z.size(); ++k) x(static_cast<Eigen::Index>(k)) = z[k];
      return sigmoid(net.logits(x)(0));
    }
    case CombinerKind::Tree: {
      const auto& leaf = tree_leaf(std::get<TreeParams>(params), z);
      return static_cast<double>(leaf.positives) / static_cast<double>(leaf.samples);
    }
  }
  return 0.0;
}

bool CombinerModel::predict(const FeaturePair& f) const {
  if (kind == CombinerKind::Tree) {
    const auto& leaf = tree_leaf(std::get<TreeParams>(params), norm.apply(f));
    return 2 * leaf.positives >= leaf.samples;
  }
  return predict_proba(f) >= 0.5;
}

std::size_t CombinerModel::tree_depth() const {
  if (kind != CombinerKind::Tree) return 0;
  return depth_from(std::get<TreeParams>(params), 0);
}

// Logistic regression ----------------------------------------------------------

CombinerModel fit_logistic(std::span<const LabeledFeature> data, const LogisticOptions& opt) {
  require_both_labels(data, "logistic regression");
  if (opt.ridge <= 0) throw ValidationError("logistic ridge strength must be > 0");
  CombinerModel m = start_model(CombinerKind::Logistic, data);
  const Eigen::MatrixXd z = design(m, data);
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  Eigen::MatrixXd x(n, d + 1);
  x << z, Eigen::VectorXd::Ones(n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = data[static_cast<std::size_t>(i)].label ? 1.0 : 0.0;
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, opt.ridge);
  penalty(d) = 0.0;

  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double j = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) j += softplus(eta(i)) - y(i) * eta(i);
    return j + 0.5 * beta.cwiseProduct(penalty).dot(beta);
  };

  auto gradient = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob(i) = sigmoid(eta(i));
    return Eigen::VectorXd(x.transpose() * (prob - y) + penalty.cwiseProduct(beta));
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  double j = objective(beta);
  LogisticParams p;
  double gnorm = 0.0;
  std::size_t it = 0;
  for (; it < opt.max_iter; ++it) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      weight(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (prob - y) + penalty.cwiseProduct(beta);
    gnorm = grad.norm();
    if (gnorm < opt.tol) break;
    Eigen::MatrixXd hess = x.transpose() * weight.asDiagonal() * x;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = beta - step;
    double jn = objective(next);
    if (jn > j - 1e-4 * grad.dot(step) && gradient(next).norm() < gnorm) {
      beta = next;
      j = std::min(j, jn);
      continue;
    }
    for (int k = 0; k < 60 && jn > j - 1e-4 * t * grad.dot(step); ++k) {
      t *= 0.5;
      next = beta - t * step;
      jn = objective(next);
    }
    if (!(jn <= j)) break;  // no further progress at machine precision
    beta = next;
    j = jn;
  }
  if (gnorm >= opt.tol) m.flags.push_back("newton stopped at gradient norm " + std::to_string(gnorm));
  p.w.assign(beta.data(), beta.data() + d);
  p.b = beta(d);
  p.iterations = it;
  p.grad_norm = gnorm;
  m.params = p;
  return m;
}

// MLP --------------------------------------------------------------------------

CombinerModel fit_mlp(std::span<const LabeledFeature> data, const MlpOptions& opt) {
  require_both_labels(data, "MLP");
  if (opt.hidden == 0 || opt.batch == 0 || opt.lr <= 0) {
    throw ValidationError("MLP needs hidden >= 1, batch >= 1 and lr > 0");
  }
  CombinerModel m = start_model(CombinerKind::Mlp, data);
  const Eigen::MatrixXd x_all = design(m, data).transpose();  // inputs x n
  const auto n = static_cast<std::size_t>(x_all.cols());
  const auto in = x_all.rows();
  const auto h = static_cast<Eigen::Index>(opt.hidden);
  Eigen::RowVectorXd y_all(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y_all(static_cast<Eigen::Index>(i)) = data[i].label ? 1.0 : 0.0;

  Rng rng(opt.seed);
  auto init = [&](Eigen::Index rows, Eigen::Index cols, double bound) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.unit() - 1.0) * bound;
    }
    return w;
  };
  MlpNet net;
  const double bound1 = std::sqrt(6.0 / static_cast<double>(in + h));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(h + h));
  const double bound3 = std::sqrt(2.0 / static_cast<double>(h + 1));
  net.w1 = init(h, in, bound1);
  net.b1 = init(h, 1, bound1);
  net.w2 = init(h, h, bound2);
  net.b2 = init(h, 1, bound2);
  net.w3 = init(1, h, bound3);
  net.b3 = init(1, 1, bound3)(0, 0);

  struct Moments {
    Eigen::MatrixXd m, v;
  };
  auto zeros_like = [](const Eigen::MatrixXd& a) {
    return Moments{Eigen::MatrixXd::Zero(a.rows(), a.cols()), Eigen::MatrixXd::Zero(a.rows(), a.cols())};
  };
  Moments mw1 = zeros_like(net.w1), mb1 = zeros_like(net.b1), mw2 = zeros_like(net.w2),
          mb2 = zeros_like(net.b2), mw3 = zeros_like(net.w3);
  Moments mb3 = zeros_like(Eigen::MatrixXd::Zero(1, 1));
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t t = 0;
  auto adam = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Moments& mo) {
    mo.m = beta1 * mo.m + (1 - beta1) * grad;
    mo.v = beta2 * mo.v + (1 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
    param.array() -= opt.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + eps);
  };

  auto full_loss = [&]() {
    const Eigen::RowVectorXd logit = net.logits(x_all);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logit.size(); ++i) loss += softplus(logit(i)) - y_all(i) * logit(i);
    loss /= static_cast<double>(n);
    const double sq = net.w1.squaredNorm() + net.w2.squaredNorm() + net.w3.squaredNorm();
    return loss + 0.5 * opt.l2 * sq / static_cast<double>(n);
  };

  MlpParams p;
  p.inputs = static_cast<std::size_t>(in);
  p.hidden = opt.hidden;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += opt.batch) {
      const std::size_t end = std::min(n, start + opt.batch);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd xb(in, bs);
      Eigen::RowVectorXd yb(bs);
      for (Eigen::Index c = 0; c < bs; ++c) {
        const auto idx = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(c)]);
        xb.col(c) = x_all.col(idx);
        yb(c) = y_all(idx);
      }
      Eigen::MatrixXd a1, a2;
      const Eigen::RowVectorXd logit = net.logits(xb, &a1, &a2);
      Eigen::RowVectorXd d3(bs);
      for (Eigen::Index c = 0; c < bs; ++c) d3(c) = (sigmoid(logit(c)) - yb(c)) / static_cast<double>(bs);
      const double reg = opt.l2 / static_cast<double>(bs);
      const Eigen::MatrixXd gw3 = d3 * a2.transpose() + reg * net.w3;
      const double gb3 = d3.sum();
      Eigen::MatrixXd d2 = (net.w3.transpose() * d3).cwiseProduct((a2.array() > 0).cast<double>().matrix());
      const Eigen::MatrixXd gw2 = d2 * a1.transpose() + reg * net.w2;
      const Eigen::VectorXd gb2 = d2.rowwise().sum();
      Eigen::MatrixXd d1 = (net.w2.transpose() * d2).cwiseProduct((a1.array() > 0).cast<double>().matrix());
      const Eigen::MatrixXd gw1 = d1 * xb.transpose() + reg * net.w1;
      const Eigen::VectorXd gb1 = d1.rowwise().sum();
      ++t;
      adam(net.w1, gw1, mw1);
      Eigen::MatrixXd b1 = net.b1;
      adam(b1, gb1, mb1);
      net.b1 = b1;
      adam(net.w2, gw2, mw2);
      Eigen::MatrixXd b2 = net.b2;
      adam(b2, gb2, mb2);
      net.b2 = b2;
      adam(net.w3, gw3, mw3);
      Eigen::MatrixXd b3 = Eigen::MatrixXd::Constant(1, 1, net.b3);
      adam(b3, Eigen::MatrixXd::Constant(1, 1, gb3), mb3);
      net.b3 = b3(0, 0);
    }
    p.loss_curve.push_back(full_loss());
  }
  store_net(net, p);
  m.params = std::move(p);
  return m;
}

// Decision tree ----------------------------------------------------------------

double gini_impurity(std::size_t positives, std::size_t total) {
  if (total == 0) return 0.0;
  const double q = static_cast<double>(positives) / static_cast<double>(total);
  return 1.0 - q * q - (1.0 - q) * (1.0 - q);
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& z;
  const std::vector<bool>& y;
  std::size_t dims;
  std::size_t max_depth;
  TreeParams out;

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    TreeNode node;
    node.samples = idx.size();
    for (auto i : idx) node.positives += y[i] ? 1 : 0;
    node.gini = gini_impurity(node.positives, node.samples);
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(node);
    if (node.gini == 0.0 || depth >= max_depth) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = -1.0;
    const double n = static_cast<double>(idx.size());
    for (std::size_t f = 0; f < dims; ++f) {
      std::vector<std::pair<double, bool>> vals;
      vals.reserve(idx.size());
      for (auto i : idx) vals.emplace_back(z[i][f], y[i]);
      std::sort(vals.begin(), vals.end());
      std::size_t left_n = 0, left_pos = 0;
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        ++left_n;
        left_pos += vals[k].second ? 1 : 0;
        if (vals[k].first == vals[k + 1].first) continue;
        const std::size_t right_n = idx.size() - left_n;
        const std::size_t right_pos = node.positives - left_pos;
        const double gain = node.gini - (static_cast<double>(left_n) / n) * gini_impurity(left_pos, left_n) -
                            (static_cast<double>(right_n) / n) * gini_impurity(right_pos, right_n);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (vals[k].first + vals[k + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (z[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    }
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& me = out.nodes[static_cast<std::size_t>(id)];
    me.feature = best_feature;
    me.threshold = best_threshold;
    me.left = l;
    me.right = r;
    return id;
  }
};

}  // namespace

CombinerModel fit_tree(std::span<const LabeledFeature> data, const TreeOptions& opt) {
  if (data.empty()) throw DataError("tree needs calibration data");
  CombinerModel m = start_model(CombinerKind::Tree, data);
  std::vector<std::vector<double>> z;
  std::vector<bool> y;
  z.reserve(data.size());
  for (const auto& d : data) {
    z.push_back(m.norm.apply(d.f));
    y.push_back(d.label);
  }
  TreeBuilder b{z, y, m.norm.dims(), opt.max_depth, {}};
  b.out.max_depth = opt.max_depth;
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  b.build(std::move(all), 0);
  m.params = std::move(b.out);
  return m;
}

CombinerModel fit_combiner(CombinerKind kind, std::span<const LabeledFeature> data,
                           std::uint64_t seed) {
  switch (kind) {
    case CombinerKind::Logistic: return fit_logistic(data);
    case CombinerKind::Mlp: {
      MlpOptions opt;
      opt.seed = seed;
      return fit_mlp(data, opt);
    }
    case CombinerKind::Tree: return fit_tree(data);
  }
  throw ValidationError("unknown combiner kind");
}

// Persistence ------------------------------------------------------------------

std::string CombinerModel::serialize() const {
  nlohmann::ordered_json j;
  j["format"] = "wmlab-combiner";
  j["version"] = 1;
  j["kind"] = to_string(kind);
  j["norm"] = {{"mean", {norm.mean[0], norm.mean[1]}},
               {"std", {norm.std[0], norm.std[1]}},
               {"active", {norm.active[0], norm.active[1]}}};
  j["flags"] = flags;
  if (kind == CombinerKind::Logistic) {
    const auto& p = std::get<LogisticParams>(params);
    j["params"] = {{"w", p.w}, {"b", p.b}, {"iterations", p.iterations}, {"grad_norm", p.grad_norm}};
  } else if (kind == CombinerKind::Mlp) {
    const auto& p = std::get<MlpParams>(params);
    j["params"] = {{"inputs", p.inputs}, {"hidden", p.hidden}, {"w1", p.w1}, {"b1", p.b1},
                   {"w2", p.w2},         {"b2", p.b2},         {"w3", p.w3}, {"b3", p.b3},
                   {"loss_curve", p.loss_curve}};
  } else {
    const auto& p = std::get<TreeParams>(params);
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : p.nodes) {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                       {"right", n.right}, {"samples", n.samples}, {"positives", n.positives},
                       {"gini", n.gini}});
    }
    j["params"] = {{"max_depth", p.max_depth}, {"nodes", nodes}};
  }
  return j.dump() + "\n";
}

CombinerModel CombinerModel::deserialize(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "wmlab-combiner") throw DataError("not a wmlab combiner file");
    if (j.at("version") != 1) throw DataError("unsupported combiner file version");
    CombinerModel m;
    m.kind = parse_combiner_kind(j.at("kind"));
    const auto& nm = j.at("norm");
    for (int k = 0; k < 2; ++k) {
      m.norm.mean[k] = nm.at("mean").at(k);
      m.norm.std[k] = nm.at("std").at(k);
      m.norm.active[k] = nm.at("active").at(k);
    }
    m.flags = j.at("flags").get<std::vector<std::string>>();
    const auto& p = j.at("params");
    if (m.kind == CombinerKind::Logistic) {
      LogisticParams lp;
      lp.w = p.at("w").get<std::vector<double>>();
      lp.b = p.at("b");
      lp.iterations = p.at("iterations");
      lp.grad_norm = p.at("grad_norm");
      if (lp.w.size() != m.norm.dims()) throw DataError("LR weights do not match active features");
      m.params = lp;
    } else if (m.kind == CombinerKind::Mlp) {
      MlpParams mp;
      mp.inputs = p.at("inputs");
      mp.hidden = p.at("hidden");
      mp.w1 = p.at("w1").get<std::vector<double>>();
      mp.b1 = p.at("b1").get<std::vector<double>>();
      mp.w2 = p.at("w2").get<std::vector<double>>();
      mp.b2 = p.at("b2").get<std::vector<double>>();
      mp.w3 = p.at("w3").get<std::vector<double>>();
      mp.b3 = p.at("b3");
      mp.loss_curve = p.at("loss_curve").get<std::vector<double>>();
      if (mp.inputs != m.norm.dims() || mp.w1.size() != mp.hidden * mp.inputs ||
          mp.w2.size() != mp.hidden * mp.hidden || mp.w3.size() != mp.hidden ||
          mp.b1.size() != mp.hidden || mp.b2.size() != mp.hidden) {
        throw DataError("MLP parameter shapes are inconsistent");
      }
      m.params = std::move(mp);
    } else {
      TreeParams tp;
      tp.max_depth = p.at("max_depth");
      for (const auto& n : p.at("nodes")) {
        TreeNode node;
        node.feature = n.at("feature");
        node.threshold = n.at("threshold");
        node.left = n.at("left");
        node.right = n.at("right");
        node.samples = n.at("samples");
        node.positives = n.at("positives");
        node.gini = n.at("gini");
        tp.nodes.push_back(node);
      }
      if (tp.nodes.empty()) throw DataError("tree has no nodes");
      const auto count = static_cast<int>(tp.nodes.size());
      for (const auto& node : tp.nodes) {
        if (node.feature >= 0 && (node.left <= 0 || node.left >= count || node.right <= 0 ||
                                  node.right >= count ||
                                  node.feature >= static_cast<int>(m.norm.dims()))) {
          throw DataError("tree node references are out of range");
        }
      }
      m.params = std::move(tp);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed combiner file: ") + e.what());
  }
}

void CombinerModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize();
}

CombinerModel CombinerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read combiner model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

HitRateReport hit_rate(std::span<const FeaturePair> features, const CascadeThresholds& t,
                       CascadeKind kind, double cost_w, double cost_d) {
  if (kind == CascadeKind::TwoStage && t.lambda_w_low > t.lambda_w_high) {
    throw ValidationError("2S thresholds need lambda_w_low <= lambda_w_high");
  }
  if (cost_w < 0 || cost_d < 0 || cost_w + cost_d <= 0) {
    throw ValidationError("unit costs must be non-negative with a positive sum");
  }
  HitRateReport r;
  if (features.empty()) return r;
  std::size_t hits = 0;
  for (const auto& f : features) {
    const bool hit = kind == CascadeKind::OneStage
                         ? f.s_w >= t.lambda_w
                         : (f.s_w >= t.lambda_w_high || f.s_w <= t.lambda_w_low);
    hits += hit ? 1 : 0;
  }
  r.gamma_hit = static_cast<double>(hits) / static_cast<double>(features.size());
  r.est_cost_ratio = (cost_w + (1.0 - r.gamma_hit) * cost_d) / (cost_w + cost_d);
  return r;
}

}  // namespace wmlab
