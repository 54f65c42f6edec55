#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace wmlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct FeaturePair {
  double s_w = 0.0;  // watermark score
  double s_d = 0.0;  // detector score
};

struct LabeledFeature {
  FeaturePair f;
  bool label = false;
};

enum class CascadeKind { OneStage, TwoStage };

std::string to_string(CascadeKind kind);
CascadeKind parse_cascade_kind(const std::string& s);

struct CascadeThresholds {
  double lambda_w = kInf;
  double lambda_d = kInf;
  double lambda_w_low = -kInf;
  double lambda_w_high = kInf;
};

/// (s_w >= lambda_w) or (s_d >= lambda_d).
bool cascade_1s_predict(const FeaturePair& f, const CascadeThresholds& t);
/// s_w >= high: positive; s_w <= low: negative; otherwise s_d >= lambda_d.
/// Throws ValidationError when low > high.
bool cascade_2s_predict(const FeaturePair& f, const CascadeThresholds& t);
bool cascade_predict(CascadeKind kind, const FeaturePair& f, const CascadeThresholds& t);

enum class CombinerKind { Logistic, Mlp, Tree };

std::string to_string(CombinerKind kind);
CombinerKind parse_combiner_kind(const std::string& s);

/// Per-feature z-normalization from calibration data. A feature whose
/// standard deviation is zero is inactive and ignored by the model.
struct ZNorm {
  double mean[2] = {0.0, 0.0};
  double std[2] = {1.0, 1.0};
  bool active[2] = {true, true};

  static ZNorm fit(std::span<const LabeledFeature> data);
  std::size_t dims() const { return (active[0] ? 1 : 0) + (active[1] ? 1 : 0); }
  /// Active normalized features, in (s_w, s_d) order.
  std::vector<double> apply(const FeaturePair& f) const;
};

struct LogisticParams {
  std::vector<double> w;  // one weight per active feature
  double b = 0.0;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
};

struct MlpParams {
  std::size_t inputs = 0;
  std::size_t hidden = 100;
  // Row-major weight matrices: w1 is hidden x inputs, w2 hidden x hidden, w3 1 x hidden.
  std::vector<double> w1, b1, w2, b2, w3;
  double b3 = 0.0;
  std::vector<double> loss_curve;  // full-data loss after each epoch
};

struct TreeNode {
  int feature = -1;  // index into the active features; -1 for a leaf
  double threshold = 0.0;  // go left when z <= threshold
  int left = -1;
  int right = -1;
  std::size_t samples = 0;
  std::size_t positives = 0;
  double gini = 0.0;
};

struct TreeParams {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t max_depth = 3;
};

class CombinerModel {
 public:
  CombinerKind kind = CombinerKind::Logistic;
  ZNorm norm;
  std::vector<std::string> flags;
  std::variant<LogisticParams, MlpParams, TreeParams> params;

  double predict_proba(const FeaturePair& f) const;
  /// LR and MLP: probability >= 0.5. Tree: leaf majority, ties positive.
  bool predict(const FeaturePair& f) const;
  /// Depth of the fitted tree (0 for a single leaf); 0 for other kinds.
  std::size_t tree_depth() const;

  std::string serialize() const;
  static CombinerModel deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static CombinerModel load(const std::filesystem::path& path);
};

struct LogisticOptions {
  double ridge = 1.0;
  double tol = 1e-8;
  std::size_t max_iter = 200;
};

struct MlpOptions {
  std::size_t hidden = 100;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct TreeOptions {
  std::size_t max_depth = 3;
};

CombinerModel fit_logistic(std::span<const LabeledFeature> data, const LogisticOptions& opt = {});
CombinerModel fit_mlp(std::span<const LabeledFeature> data, const MlpOptions& opt = {});
CombinerModel fit_tree(std::span<const LabeledFeature> data, const TreeOptions& opt = {});
CombinerModel fit_combiner(CombinerKind kind, std::span<const LabeledFeature> data,
                           std::uint64_t seed);

double gini_impurity(std::size_t positives, std::size_t total);

struct HitRateReport {
  double gamma_hit = 0.0;
  double est_cost_ratio = 1.0;  // (C_w + (1 - gamma) C_d) / (C_w + C_d)
};

HitRateReport hit_rate(std::span<const FeaturePair> features, const CascadeThresholds& t,
                       CascadeKind kind, double cost_w = 0.0, double cost_d = 1.0);

}  // namespace wmlab
