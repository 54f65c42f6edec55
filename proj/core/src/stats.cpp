#include "wmlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"

namespace wmlab {

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form converges fast for small lambda.
    const double pi = std::acos(-1.0);
    const double c = std::sqrt(2.0 * pi) / lambda;
    double sum = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = (2.0 * k - 1.0) * pi / lambda;
      sum += std::exp(-t * t / 8.0);
    }
    return std::clamp(1.0 - c * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

namespace {

double stephens_p(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

TestResult ks_uniform(std::span<const double> samples) {
  if (samples.empty()) throw DataError("KS test needs samples");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, stephens_p(d, v.size()), 0};
}

TestResult ks_uniform_grid(std::span<const double> samples, std::size_t m) {
  if (samples.empty()) throw DataError("KS test needs samples");
  const double atoms = static_cast<double>(m + 1);
  std::vector<std::size_t> counts(m + 1, 0);
  for (double x : samples) {
    const auto k = static_cast<long long>(std::llround(x * atoms));
    if (k < 0 || k > static_cast<long long>(m) || std::abs(x * atoms - static_cast<double>(k)) > 1e-6) {
      throw DataError("value is not on the discrete uniform grid");
    }
    counts[static_cast<std::size_t>(k)] += 1;
  }
  const double n = static_cast<double>(samples.size());
  double cum = 0.0, d = 0.0;
  for (std::size_t k = 0; k <= m; ++k) {
    cum += static_cast<double>(counts[k]);
    d = std::max(d, std::abs(cum / n - static_cast<double>(k + 1) / atoms));
  }
  return {d, stephens_p(d, samples.size()), 0};
}

TestResult chi_square_gof(std::span<const std::size_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size()) throw ValidationError("counts and probabilities differ in length");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw DataError("chi-square test needs observations");
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * total;
    if (e <= 0.0) {
      if (counts[i] > 0) stat = std::numeric_limits<double>::infinity();
      continue;
    }
    ++cells;
    const double diff = static_cast<double>(counts[i]) - e;
    stat += diff * diff / e;
  }
  if (cells < 2) throw DataError("chi-square test needs at least two cells with positive probability");
  TestResult r;
  r.statistic = stat;
  r.df = cells - 1;
  r.p_value = std::isinf(stat) ? 0.0 : chi2_sf(static_cast<double>(r.df), stat);
  return r;
}

}  // namespace wmlab
