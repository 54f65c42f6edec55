#pragma once

#include <array>
#include <random>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wmlab {

using Bytes = std::vector<std::uint8_t>;

/// Secret watermarking key. Integer keys are serialized as 8 big-endian bytes.
class WatermarkKey {
 public:
  explicit WatermarkKey(Bytes bytes);
  static WatermarkKey from_integer(std::uint64_t k);
  static WatermarkKey from_string(std::string_view s);

  std::span<const std::uint8_t> bytes() const { return bytes_; }
  bool operator==(const WatermarkKey&) const = default;

 private:
  Bytes bytes_;
};

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);

/// SHA-256(key || 0x1F || context). The hasher keeps a per-thread context.
Digest keyed_digest(const WatermarkKey& key, std::span<const std::uint8_t> context);

/// Seed h(K|context): first 8 digest bytes as a big-endian integer.
std::uint64_t prf_seed(const WatermarkKey& key, std::span<const std::uint8_t> context);

/// Uniform draw in [0,1) keyed by (key, context): prf_seed / 2^64.
double prf_uniform(const WatermarkKey& key, std::span<const std::uint8_t> context);

/// Same as prf_seed for callers that hold raw key bytes (no allocation).
std::uint64_t prf_seed_raw(std::span<const std::uint8_t> key, std::span<const std::uint8_t> context);

/// Maps a 64-bit seed to [0,1) the same way prf_uniform does.
inline double seed_to_unit(std::uint64_t seed) {
  return static_cast<double>(seed) * 0x1.0p-64;
}

/// Appends v as 4 (or 8) big-endian bytes.
void append_be32(Bytes& out, std::uint32_t v);
void append_be64(Bytes& out, std::uint64_t v);

/// Token ids as concatenated 4-byte big-endian words.
Bytes encode_ids(std::span<const std::uint32_t> ids);

/// Child seed = first 8 bytes of SHA-256(be64(global) || 0x1F || stage || 0x1F || item).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage,
                          std::string_view item = {});

/// Thin deterministic generator. Uses mt19937_64 for the bit stream and fixed
/// conversions so streams are reproducible regardless of the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0,1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Index drawn from non-negative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Special functions ---------------------------------------------------------

/// Regularized lower incomplete gamma P(a, x) for real a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Gamma(shape, 1) CDF for integer shape >= 1. Throws ValidationError on shape 0.
double gamma_cdf(std::uint64_t shape, double x);

/// Chi-square CDF with k degrees of freedom, via P(k/2, x/2).
double chi2_cdf(double k, double x);

/// Upper tail of chi-square (1 - CDF), computed without cancellation.
double chi2_sf(double k, double x);

/// Exact Irwin-Hall CDF up to this many summands; Edgeworth-corrected normal above.
inline constexpr std::uint64_t kIrwinHallExactMax = 30;

/// CDF of the sum of k iid U(0,1). Throws ValidationError on k == 0.
double irwin_hall_cdf(std::uint64_t k, double x);

/// Standard normal CDF.
double std_normal_cdf(double z);

}  // namespace wmlab
