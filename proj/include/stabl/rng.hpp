#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "stabl/common.hpp"

namespace stabl {

namespace detail {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used as a stateless mixing
// function of (key, counter) rather than as a sequential generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based splittable pseudo-random stream. A draw is a pure function of
// (master seed, purpose label, replicate, counter), so any draw in any audit
// can be reproduced in isolation, and disjoint streams are independent without
// shared mutable state.
class SeedStream {
 public:
  SeedStream(std::uint64_t master_seed, std::string_view label, std::uint64_t replicate = 0)
      : key_(detail::mix64(detail::mix64(master_seed) ^ detail::hash_label(label)) ^
             detail::mix64(replicate * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL)) {}

  // Derived stream; draws never collide with the parent's.
  SeedStream child(std::uint64_t index) const {
    SeedStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(index + 0x3c6ef372fe94f82bULL));
    s.counter_ = 0;
    return s;
  }

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(counter_++)); }

  // Uniform on [0,1), 53 bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0,...,bound-1}.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Inverse standard-normal CDF (Acklam's rational approximation, |error| < 1.2e-9),
// applied to stream uniforms so that synthetic data is bit-reproducible from the
// stream algorithm alone.
inline double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse_normal_cdf: u must lie in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (u < plow) {
    q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = u - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double sample_normal(SeedStream& stream) { return inverse_normal_cdf(stream.next_unit()); }

inline double sample_uniform(SeedStream& stream, double lo, double hi) {
  return lo + (hi - lo) * stream.next_unit();
}

inline bool sample_bernoulli(SeedStream& stream, double p) { return stream.next_unit() < p; }

// Poisson by sequential CDF inversion. Rates here are bag sizes, far below the
// underflow limit of exp(-rate).
inline long sample_poisson(SeedStream& stream, double rate) {
  if (rate < 0.0) throw DomainError("sample_poisson: rate must be >= 0");
  if (rate > 700.0) throw DomainError("sample_poisson: rate too large for CDF inversion");
  double u = stream.next_unit();
  double pmf = std::exp(-rate);
  double cdf = pmf;
  long k = 0;
  while (u >= cdf && k < 100000) {
    ++k;
    pmf *= rate / static_cast<double>(k);
    cdf += pmf;
  }
  return k;
}

inline long sample_binomial(SeedStream& stream, long n, double p) {
  long k = 0;
  for (long i = 0; i < n; ++i) k += sample_bernoulli(stream, p) ? 1 : 0;
  return k;
}

}  // namespace stabl
