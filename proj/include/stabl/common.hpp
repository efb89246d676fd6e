#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace stabl {

// Invalid scheme/learner/config parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument to a numerical routine (out-of-domain inputs, bad data).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact enumeration would exceed the configured class limit.
class EnumerationTooLarge : public std::runtime_error {
 public:
  EnumerationTooLarge(std::size_t required, std::size_t limit)
      : std::runtime_error("support enumeration requires a limit of at least " +
                           std::to_string(required) + " classes (configured limit " +
                           std::to_string(limit) + ")"),
        required_limit(required) {}
  std::size_t required_limit;
};

// Truncation could not reach the requested residual tail mass.
class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Compensated (Kahan) accumulator. Ensemble averages are summed with this so
// that exact-mode identities hold to 1e-12 even at B ~ 1e5 terms.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

// Fixed-order pairwise reduction; the result does not depend on how the work
// producing `terms` was scheduled.
inline double pairwise_sum(const std::vector<double>& terms) {
  if (terms.empty()) return 0.0;
  std::vector<double> level(terms);
  while (level.size() > 1) {
    std::vector<double> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(level[i] + level[i + 1]);
    if (level.size() % 2 == 1) next.push_back(level.back());
    level.swap(next);
  }
  return level[0];
}

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 16; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return std::string(buf);
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

}  // namespace stabl
