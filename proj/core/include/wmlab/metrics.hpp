#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmlab/hybrid.hpp"
#include "wmlab/randomness.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

// Truncation -----------------------------------------------------------------

struct Truncated {
  TokenSequence tokens;
  bool was_short = false;  // text had fewer than T tokens and is unchanged
};

Truncated truncate_tokens(std::span<const TokenId> tokens, std::size_t max_tokens);

/// First T tokens of the re-tokenized text, detokenized again.
std::string truncate_record(std::string_view text, std::size_t max_tokens, const Vocabulary& vocab,
                            bool* was_short = nullptr);

// ROC curves -------------------------------------------------------------------

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  std::vector<double> thresholds;  // operating point provenance; empty for anchors
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by FPR
  std::optional<double> grid_pct;  // set for percentile-grid sweeps; finer grids can only help
};

/// Non-dominated points (lower FPR, higher TPR) of the input plus the (0,0)
/// and (1,1) anchors, sorted by FPR. FPR and TPR are strictly increasing.
RocCurve pareto_front(std::span<const RocPoint> points);

/// Trapezoid area under the piecewise-linear curve on [0, max_fpr]; the curve
/// is interpolated at the cut and held flat past its last point.
double roc_area(const RocCurve& curve, double max_fpr = 1.0);

/// McClish-standardized partial AUC on [0, f], mapped to [50, 100]:
/// 50 * (1 + (A - f^2/2) / (f - f^2/2)). Throws ValidationError unless 0 < f <= 1.
double paucc(const RocCurve& curve, double max_fpr = 0.01);

/// Exact ROC of "positive iff score >= t" with t at every distinct score
/// (plus +inf). Ties make diagonal segments, so the area equals the
/// Mann-Whitney AUC. Throws DataError unless both classes are present.
RocCurve sweep_single_threshold(std::span<const double> scores, std::span<const bool> labels);

/// Linear-interpolation percentile (0..100) of unsorted values.
double percentile(std::span<const double> values, double pct);

/// Candidate thresholds: percentiles at grid_pct steps from 0 to 100, or every
/// distinct value when grid_pct <= 0; always includes -inf and +inf. Sorted, unique.
std::vector<double> candidate_thresholds(std::span<const double> values, double grid_pct);

/// Evaluates every threshold combination of the cascade on the candidate
/// grids and returns the Pareto front. Threshold provenance is
/// (lambda_w, lambda_d) for 1S and (lambda_w_low, lambda_w_high, lambda_d) for 2S.
RocCurve sweep_cascade_grid(std::span<const LabeledFeature> records, CascadeKind kind,
                            double grid_pct = 1.0);

// Calibrated accuracy ----------------------------------------------------------

enum class Method { WatermarkOnly, DetectorOnly, OneStage, TwoStage, LR, MLP, Tree };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct Confusion {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  double tpr() const;
  double tnr() const;
  double balanced_accuracy() const { return 0.5 * (tpr() + tnr()); }
};

/// Requires equally many positives and negatives (DataError otherwise).
void require_balanced(std::span<const bool> labels);

struct CalibratedMethod {
  Method method = Method::WatermarkOnly;
  CascadeThresholds thresholds;            // cascades and single-score rules
  std::optional<CombinerModel> model;      // learned combiners
  double calibration_accuracy = 0.0;

  bool predict(const FeaturePair& f) const;
  Confusion confusion(std::span<const LabeledFeature> records) const;
  /// Balanced accuracy on a class-balanced split.
  double accuracy(std::span<const LabeledFeature> test) const;
};

struct CalibrationOptions {
  double grid_pct = 1.0;  // cascade grid
  std::uint64_t seed = 0;  // learned combiners
};

/// Single scores: every distinct calibration value. Cascades: exhaustive
/// percentile grid. Ties: higher TPR, then lower lambda_w (2S: low, then
/// high), then lower lambda_d. Learned combiners are fitted on the data.
CalibratedMethod calibrate_accuracy(std::span<const LabeledFeature> calibration, Method method,
                                    const CalibrationOptions& opt = {});

// Bootstrap --------------------------------------------------------------------

/// Resamples positives and negatives separately with replacement, keeping
/// each class size. Returns indices into `labels`.
std::vector<std::size_t> class_balanced_resample(std::span<const bool> labels, Rng& rng);

struct BootstrapResult {
  double point = 0.0;
  double se = 0.0;  // sample standard deviation over replicates
};

using MultiMetric = std::function<std::vector<double>(std::span<const std::size_t> indices)>;

/// Evaluates several metrics on the same replicates.
std::vector<BootstrapResult> bootstrap_se(std::span<const bool> labels, const MultiMetric& metric,
                                          std::size_t replicates, std::uint64_t seed);

BootstrapResult bootstrap_se(std::span<const bool> labels,
                             const std::function<double(std::span<const std::size_t>)>& metric,
                             std::size_t replicates, std::uint64_t seed);

}  // namespace wmlab
