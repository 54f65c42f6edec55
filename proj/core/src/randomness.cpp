#include "wmlab/randomness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "wmlab/error.hpp"

namespace wmlab {

namespace {

constexpr std::uint8_t kSeparator = 0x1F;

// One EVP context per thread; fetching the digest once avoids the per-call
// provider lookup that dominates short-message hashing cost.
class Sha256Hasher {
 public:
  Sha256Hasher()
      : md_(EVP_MD_fetch(nullptr, "SHA256", nullptr)), ctx_(EVP_MD_CTX_new()) {
    if (md_ == nullptr || ctx_ == nullptr) throw std::runtime_error("OpenSSL SHA-256 unavailable");
  }
  ~Sha256Hasher() {
    EVP_MD_CTX_free(ctx_);
    EVP_MD_free(md_);
  }
  Sha256Hasher(const Sha256Hasher&) = delete;
  Sha256Hasher& operator=(const Sha256Hasher&) = delete;

  void begin() { EVP_DigestInit_ex(ctx_, md_, nullptr); }
  void update(std::span<const std::uint8_t> data) {
    if (!data.empty()) EVP_DigestUpdate(ctx_, data.data(), data.size());
  }
  void update(std::uint8_t byte) { EVP_DigestUpdate(ctx_, &byte, 1); }
  Digest finish() {
    Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, out.data(), &len);
    return out;
  }

 private:
  EVP_MD* md_;
  EVP_MD_CTX* ctx_;
};

Sha256Hasher& hasher() {
  thread_local Sha256Hasher h;
  return h;
}

std::uint64_t first_u64(const Digest& d) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

}  // namespace

WatermarkKey::WatermarkKey(Bytes bytes) : bytes_(std::move(bytes)) {
  if (bytes_.empty()) throw ValidationError("watermark key must be non-empty");
}

WatermarkKey WatermarkKey::from_integer(std::uint64_t k) {
  Bytes b;
  append_be64(b, k);
  return WatermarkKey(std::move(b));
}

WatermarkKey WatermarkKey::from_string(std::string_view s) {
  return WatermarkKey(Bytes(s.begin(), s.end()));
}

Digest sha256(std::span<const std::uint8_t> data) {
  auto& h = hasher();
  h.begin();
  h.update(data);
  return h.finish();
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Digest keyed_digest(const WatermarkKey& key, std::span<const std::uint8_t> context) {
  auto& h = hasher();
  h.begin();
  h.update(key.bytes());
  h.update(kSeparator);
  h.update(context);
  return h.finish();
}

std::uint64_t prf_seed(const WatermarkKey& key, std::span<const std::uint8_t> context) {
  return first_u64(keyed_digest(key, context));
}

std::uint64_t prf_seed_raw(std::span<const std::uint8_t> key, std::span<const std::uint8_t> context) {
  auto& h = hasher();
  h.begin();
  h.update(key);
  h.update(kSeparator);
  h.update(context);
  return first_u64(h.finish());
}

double prf_uniform(const WatermarkKey& key, std::span<const std::uint8_t> context) {
  return seed_to_unit(prf_seed(key, context));
}

void append_be32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void append_be64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

Bytes encode_ids(std::span<const std::uint32_t> ids) {
  Bytes out;
  out.reserve(ids.size() * 4);
  for (auto id : ids) append_be32(out, id);
  return out;
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::string_view item) {
  Bytes msg;
  append_be64(msg, global_seed);
  msg.push_back(kSeparator);
  msg.insert(msg.end(), stage.begin(), stage.end());
  msg.push_back(kSeparator);
  msg.insert(msg.end(), item.begin(), item.end());
  return first_u64(sha256(msg));
}

// Rng -----------------------------------------------------------------------

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below requires n > 0");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ValidationError("categorical draw needs positive total weight");
  const double target = unit() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

double Rng::normal() {
  double u1 = unit();
  while (u1 <= 0.0) u1 = unit();
  const double u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Special functions ---------------------------------------------------------

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 1'000'000;

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("incomplete gamma requires a > 0");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double gamma_cdf(std::uint64_t shape, double x) {
  if (shape == 0) throw ValidationError("gamma_cdf requires shape >= 1");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  // Integer shape: P(T, x) = P(Poisson(x) >= T). Sum whichever tail is small.
  const double t = static_cast<double>(shape);
  const double log_x = std::log(x);
  if (x < t) {
    double term = std::exp(-x + t * log_x - std::lgamma(t + 1.0));
    double sum = 0.0;
    for (double k = t; k < t + kMaxIter; k += 1.0) {
      sum += term;
      term *= x / (k + 1.0);
      if (term < sum * kEps) break;
    }
    return std::min(sum, 1.0);
  }
  double term = std::exp(-x + (t - 1.0) * log_x - std::lgamma(t));
  double sum = 0.0;
  for (double k = t - 1.0; k >= 0.0; k -= 1.0) {
    sum += term;
    if (k == 0.0 || term < sum * kEps) break;
    term *= k / x;
  }
  return std::max(0.0, 1.0 - sum);
}

double chi2_cdf(double k, double x) {
  if (!(k > 0.0)) throw ValidationError("chi2_cdf requires k > 0");
  return regularized_gamma_p(0.5 * k, 0.5 * x);
}

double chi2_sf(double k, double x) {
  if (!(k > 0.0)) throw ValidationError("chi2_sf requires k > 0");
  const double a = 0.5 * k;
  const double h = 0.5 * x;
  if (h <= 0.0) return 1.0;
  if (h < a + 1.0) return 1.0 - gamma_p_series(a, h);
  return gamma_q_fraction(a, h);
}

namespace {

long double irwin_hall_exact(std::uint64_t k, long double x) {
  // F(x) = sum_{j<=floor(x)} (-1)^j (x-j)^k / (j! (k-j)!), reflected so x <= k/2.
  const long double kk = static_cast<long double>(k);
  bool reflect = false;
  if (x > kk / 2) {
    x = kk - x;
    reflect = true;
  }
  long double sum = 0.0L;
  const auto upper = static_cast<std::uint64_t>(std::floor(x));
  for (std::uint64_t j = 0; j <= upper && j <= k; ++j) {
    const long double jj = static_cast<long double>(j);
    const long double log_coef = -std::lgamma(jj + 1.0L) - std::lgamma(kk - jj + 1.0L);
    const long double term = std::exp(log_coef + kk * std::log(x - jj));
    sum += (j % 2 == 0) ? term : -term;
  }
  sum = std::clamp(sum, 0.0L, 1.0L);
  return reflect ? 1.0L - sum : sum;
}

double irwin_hall_edgeworth(std::uint64_t k, double x) {
  const double n = static_cast<double>(k);
  const double sd = std::sqrt(n / 12.0);
  const double z = (x - n / 2.0) / sd;
  // Standardized cumulants of the uniform sum: excess kurtosis and sixth cumulant.
  const double g2 = -1.2 / n;
  const double g4 = 1728.0 / (252.0 * n * n);
  const double z2 = z * z;
  const double he3 = z * (z2 - 3.0);
  const double he5 = z * (z2 * z2 - 10.0 * z2 + 15.0);
  const double he7 = z * (z2 * z2 * z2 - 21.0 * z2 * z2 + 105.0 * z2 - 105.0);
  const double pdf = std::exp(-0.5 * z2) / std::sqrt(2.0 * std::numbers::pi);
  const double correction = g2 / 24.0 * he3 + g4 / 720.0 * he5 + g2 * g2 / 1152.0 * he7;
  return std::clamp(std_normal_cdf(z) - pdf * correction, 0.0, 1.0);
}

}  // namespace

double irwin_hall_cdf(std::uint64_t k, double x) {
  if (k == 0) throw ValidationError("irwin_hall_cdf requires k >= 1");
  if (std::isnan(x)) return x;
  const double n = static_cast<double>(k);
  if (x <= 0.0) return 0.0;
  if (x >= n) return 1.0;
  if (k == 1) return x;
  if (k <= kIrwinHallExactMax) return static_cast<double>(irwin_hall_exact(k, x));
  return irwin_hall_edgeworth(k, x);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace wmlab
