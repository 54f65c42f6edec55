#pragma once

#include <span>

namespace wmlab {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;  // chi-square only
};

/// Kolmogorov limiting distribution: P(sqrt(n) D > lambda).
double kolmogorov_sf(double lambda);

/// One-sample KS test against U(0,1); p-value from the limiting law with
/// Stephens' small-sample correction.
TestResult ks_uniform(std::span<const double> samples);

/// KS distance to the uniform law on {0, 1/(m+1), ..., m/(m+1)} (m + 1 atoms),
/// measured at the atoms. The continuous p-value is conservative here.
TestResult ks_uniform_grid(std::span<const double> samples, std::size_t m);

/// Pearson goodness of fit of counts against probabilities (cells with zero
/// probability must be empty; otherwise the statistic is infinite).
TestResult chi_square_gof(std::span<const std::size_t> counts, std::span<const double> probs);

}  // namespace wmlab
