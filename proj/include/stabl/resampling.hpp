#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "stabl/common.hpp"
#include "stabl/rng.hpp"

namespace stabl {

// A bag: ordered sequence of 1-based training-set indices.
using Bag = std::vector<int>;

enum class SchemeKind { Subbag, BernoulliSubbag, Classical, Poissonized };

inline const char* kind_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::Subbag: return "subbag";
    case SchemeKind::BernoulliSubbag: return "bernoulli";
    case SchemeKind::Classical: return "classical";
    case SchemeKind::Poissonized: return "poisson";
  }
  return "?";
}

// One of the four bag distributions Q_n. Immutable after construction.
//
// The drop-one construction can leave Bernoulli subbagging with a fractional
// per-point inclusion rate, and Poissonized bagging with a fractional mean bag
// size, so those two parameters are stored as reals alongside the nominal m.
class ResamplingScheme {
 public:
  static ResamplingScheme subbag(int n, int m) {
    require(n >= 1 && m >= 1, "subbag: n and m must be positive");
    if (m > n - 1) throw ConfigError("subbag: requires 1 <= m <= n-1 so that p < 1");
    return ResamplingScheme(SchemeKind::Subbag, n, m, 0.0, 0.0);
  }
  static ResamplingScheme bernoulli_subbag(int n, int m) {
    require(n >= 1 && m >= 1 && m <= n, "bernoulli: requires 1 <= m <= n");
    return ResamplingScheme(SchemeKind::BernoulliSubbag, n, m,
                            static_cast<double>(m) / n, 0.0);
  }
  static ResamplingScheme classical(int n, int m) {
    require(n >= 1 && m >= 1, "classical: n and m must be positive");
    return ResamplingScheme(SchemeKind::Classical, n, m, 0.0, 0.0);
  }
  static ResamplingScheme poissonized(int n, int m) {
    require(n >= 1 && m >= 1, "poisson: n and m must be positive");
    return ResamplingScheme(SchemeKind::Poissonized, n, m, 0.0, static_cast<double>(m));
  }

  SchemeKind kind() const { return kind_;  }
  int n() const { return n_; }
  int m() const { return m_; }
  // Bernoulli subbagging: per-point inclusion probability.
  double inclusion_rate() const { return incl_; }
  // Poissonized bagging: mean bag length.
  double poisson_rate() const { return rate_; }

  std::string spec_string() const {
    std::string s = kind_name(kind_);
    s += ":" + std::to_string(m_) + "@n=" + std::to_string(n_);
    if (kind_ == SchemeKind::BernoulliSubbag) s += ",incl=" + format_double(incl_);
    if (kind_ == SchemeKind::Poissonized) s += ",rate=" + format_double(rate_);
    return s;
  }

  friend ResamplingScheme drop_one_scheme(const ResamplingScheme&);

 private:
  ResamplingScheme(SchemeKind kind, int n, int m, double incl, double rate)
      : kind_(kind), n_(n), m_(m), incl_(incl), rate_(rate) {}
  static void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  }

  SchemeKind kind_;
  int n_;
  int m_;
  double incl_;
  double rate_;
};

// p = P_{r~Q_n}{i in r}  (Table-1 column per scheme kind).
inline double inclusion_probability(const ResamplingScheme& s) {
  const double n = s.n();
  switch (s.kind()) {
    case SchemeKind::Subbag: return s.m() / n;
    case SchemeKind::BernoulliSubbag: return s.inclusion_rate();
    case SchemeKind::Classical: return 1.0 - std::pow(1.0 - 1.0 / n, s.m());
    case SchemeKind::Poissonized: return 1.0 - std::exp(-s.poisson_rate() / n);
  }
  throw ConfigError("unreachable");
}

// q = -Cov(1{i in r}, 1{j in r}); zero for the schemes with independent
// per-point inclusion.
inline double pair_covariance_deficit(const ResamplingScheme& s) {
  if (s.n() < 2) throw ConfigError("pair covariance deficit undefined for n < 2");
  const double n = s.n();
  switch (s.kind()) {
    case SchemeKind::Subbag: {
      double p = s.m() / n;
      return p * (1.0 - p) / (n - 1.0);
    }
    case SchemeKind::BernoulliSubbag: return 0.0;
    case SchemeKind::Classical:
      return std::pow(1.0 - 1.0 / n, 2.0 * s.m()) - std::pow(1.0 - 2.0 / n, s.m());
    case SchemeKind::Poissonized: return 0.0;
  }
  throw ConfigError("unreachable");
}

// Q_n conditioned on avoiding one fixed index, re-expressed over n-1 points.
// Subbag with m = n-1 yields a degenerate p = 1 scheme downstream; that is
// flagged by the consumers that condition on exclusion, not here.
inline ResamplingScheme drop_one_scheme(const ResamplingScheme& s) {
  if (s.n() < 2) throw ConfigError("drop_one_scheme: requires n >= 2");
  const int n1 = s.n() - 1;
  switch (s.kind()) {
    case SchemeKind::Subbag:
      return ResamplingScheme(SchemeKind::Subbag, n1, s.m(), 0.0, 0.0);
    case SchemeKind::BernoulliSubbag:
      return ResamplingScheme(SchemeKind::BernoulliSubbag, n1, std::min(s.m(), n1),
                              s.inclusion_rate(), 0.0);
    case SchemeKind::Classical:
      return ResamplingScheme(SchemeKind::Classical, n1, s.m(), 0.0, 0.0);
    case SchemeKind::Poissonized:
      return ResamplingScheme(SchemeKind::Poissonized, n1, s.m(), 0.0,
                              s.poisson_rate() * n1 / s.n());
  }
  throw ConfigError("unreachable");
}

// Uniform ordered sample of `m` distinct indices from 1..n (partial Fisher-Yates).
inline Bag sample_distinct_sequence(int n, int m, SeedStream& stream) {
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 1);
  Bag bag;
  bag.reserve(m);
  for (int j = 0; j < m; ++j) {
    std::uint64_t k = stream.next_below(static_cast<std::uint64_t>(n - j));
    bag.push_back(pool[j + static_cast<int>(k)]);
    std::swap(pool[j], pool[j + static_cast<int>(k)]);
  }
  return bag;
}

inline Bag sample_bag(const ResamplingScheme& s, SeedStream& stream) {
  const int n = s.n();
  switch (s.kind()) {
    case SchemeKind::Subbag:
      return sample_distinct_sequence(n, s.m(), stream);
    case SchemeKind::BernoulliSubbag: {
      long len = sample_binomial(stream, n, s.inclusion_rate());
      return sample_distinct_sequence(n, static_cast<int>(len), stream);
    }
    case SchemeKind::Classical: {
      Bag bag(s.m());
      for (int& i : bag) i = 1 + static_cast<int>(stream.next_below(n));
      return bag;
    }
    case SchemeKind::Poissonized: {
      long len = sample_poisson(stream, s.poisson_rate());
      Bag bag(len);
      for (int& i : bag) i = 1 + static_cast<int>(stream.next_below(n));
      return bag;
    }
  }
  throw ConfigError("unreachable");
}

// One equivalence class of bags. With collapsing, order-equivalent bags (and
// for with-replacement schemes, multiset-equivalent bags) are merged and
// `probability` carries the class total; uncollapsed, each class is a single
// ordered sequence. `member_mask` has bit i-1 set iff index i appears.
struct BagClass {
  Bag representative;
  double probability;
  std::uint64_t member_mask;
};

struct SupportOptions {
  bool collapse_symmetric = false;  // valid only for symmetric learners
  std::size_t limit = 1'000'000;
  double poisson_tail = 1e-12;
};

namespace detail {

inline double log_factorial(double k) { return std::lgamma(k + 1.0); }

inline double binom(double n, double k) {
  if (k < 0 || k > n) return 0.0;
  return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

inline std::uint64_t mask_of(const Bag& bag) {
  std::uint64_t m = 0;
  for (int i : bag) m |= std::uint64_t{1} << (i - 1);
  return m;
}

// Probability of drawing exactly this multiset under uniform [n]^len sampling,
// given the bag length.
inline double multiset_weight(const Bag& sorted_bag, int n) {
  const int len = static_cast<int>(sorted_bag.size());
  double log_perms = log_factorial(len);
  int run = 1;
  for (std::size_t i = 1; i <= sorted_bag.size(); ++i) {
    if (i < sorted_bag.size() && sorted_bag[i] == sorted_bag[i - 1]) {
      ++run;
    } else {
      log_perms -= log_factorial(run);
      run = 1;
    }
  }
  return std::exp(log_perms - len * std::log(static_cast<double>(n)));
}

template <typename Fn>
void for_each_combination(int n, int m, Fn&& fn) {
  Bag combo(m);
  std::iota(combo.begin(), combo.end(), 1);
  for (;;) {
    fn(combo);
    int j = m - 1;
    while (j >= 0 && combo[j] == n - (m - 1 - j)) --j;
    if (j < 0) break;
    ++combo[j];
    for (int k = j + 1; k < m; ++k) combo[k] = combo[k - 1] + 1;
  }
}

template <typename Fn>
void for_each_sequence(int n, int len, Fn&& fn) {
  Bag seq(len, 1);
  for (;;) {
    fn(seq);
    int j = len - 1;
    while (j >= 0 && seq[j] == n) --j;
    if (j < 0) break;
    ++seq[j];
    for (int k = j + 1; k < len; ++k) seq[k] = 1;
  }
}

template <typename Fn>
void for_each_multiset(int n, int len, Fn&& fn) {
  Bag seq(len, 1);  // nondecreasing sequences
  for (;;) {
    fn(seq);
    int j = len - 1;
    while (j >= 0 && seq[j] == n) --j;
    if (j < 0) break;
    ++seq[j];
    for (int k = j + 1; k < len; ++k) seq[k] = seq[j];
  }
}

// Smallest truncation point leaving Poisson tail mass below `tol`; also
// returns the retained mass for renormalization.
inline std::pair<int, double> poisson_truncation(double rate, double tol) {
  double pmf = std::exp(-rate);
  double cdf = pmf;
  int k = 0;
  while (1.0 - cdf >= tol) {
    if (k > 100000) throw PrecisionError("Poissonized truncation cannot reach requested tail mass");
    ++k;
    pmf *= rate / k;
    cdf += pmf;
  }
  return {k, cdf};
}

}  // namespace detail

// Exhaustive support of Q_n as equivalence classes with total probability 1.
// The Poissonized support is truncated at tail mass < poisson_tail and
// renormalized.
inline std::vector<BagClass> enumerate_support(const ResamplingScheme& s,
                                               const SupportOptions& opt = {}) {
  const int n = s.n();
  if (n > 64) throw EnumerationTooLarge(std::size_t(-1), opt.limit);
  const bool collapse = opt.collapse_symmetric;

  auto check = [&](double count) {
    if (!(count <= static_cast<double>(opt.limit)))
      throw EnumerationTooLarge(
          count > 1e18 ? std::size_t(-1) : static_cast<std::size_t>(std::ceil(count)), opt.limit);
  };

  std::vector<BagClass> classes;
  switch (s.kind()) {
    case SchemeKind::Subbag: {
      const int m = s.m();
      double n_sets = detail::binom(n, m);
      if (collapse) {
        check(n_sets);
        double prob = 1.0 / n_sets;
        detail::for_each_combination(n, m, [&](const Bag& combo) {
          classes.push_back({combo, prob, detail::mask_of(combo)});
        });
      } else {
        check(n_sets * std::exp(detail::log_factorial(m)));
        double prob = 1.0 / (n_sets * std::exp(detail::log_factorial(m)));
        detail::for_each_combination(n, m, [&](const Bag& combo) {
          Bag perm = combo;
          std::uint64_t mask = detail::mask_of(combo);
          do {
            classes.push_back({perm, prob, mask});
          } while (std::next_permutation(perm.begin(), perm.end()));
        });
      }
      break;
    }
    case SchemeKind::BernoulliSubbag: {
      const double pi = s.inclusion_rate();
      if (collapse) {
        check(std::pow(2.0, n));
        for (int len = 0; len <= n; ++len) {
          double prob = std::pow(pi, len) * std::pow(1.0 - pi, n - len);
          if (len == 0) {
            classes.push_back({Bag{}, prob, 0});
          } else {
            detail::for_each_combination(n, len, [&](const Bag& combo) {
              classes.push_back({combo, prob, detail::mask_of(combo)});
            });
          }
        }
      } else {
        double count = 0;
        for (int len = 0; len <= n; ++len)
          count += detail::binom(n, len) * std::exp(detail::log_factorial(len));
        check(count);
        for (int len = 0; len <= n; ++len) {
          // per ordered sequence: pi^len (1-pi)^(n-len) / len!
          double prob = std::pow(pi, len) * std::pow(1.0 - pi, n - len) /
                        std::exp(detail::log_factorial(len));
          if (len == 0) {
            classes.push_back({Bag{}, prob, 0});
            continue;
          }
          detail::for_each_combination(n, len, [&](const Bag& combo) {
            Bag perm = combo;
            std::uint64_t mask = detail::mask_of(combo);
            do {
              classes.push_back({perm, prob, mask});
            } while (std::next_permutation(perm.begin(), perm.end()));
          });
        }
      }
      break;
    }
    case SchemeKind::Classical: {
      const int m = s.m();
      if (collapse) {
        check(detail::binom(n + m - 1, m));
        detail::for_each_multiset(n, m, [&](const Bag& ms) {
          classes.push_back({ms, detail::multiset_weight(ms, n), detail::mask_of(ms)});
        });
      } else {
        check(std::pow(static_cast<double>(n), m));
        double prob = std::pow(static_cast<double>(n), -m);
        detail::for_each_sequence(n, m, [&](const Bag& seq) {
          classes.push_back({seq, prob, detail::mask_of(seq)});
        });
      }
      break;
    }
    case SchemeKind::Poissonized: {
      const double rate = s.poisson_rate();
      auto [lmax, mass] = detail::poisson_truncation(rate, opt.poisson_tail);
      double count = 0;
      for (int len = 0; len <= lmax; ++len)
        count += collapse ? detail::binom(n + len - 1, len) : std::pow(static_cast<double>(n), len);
      check(count);
      double pmf = std::exp(-rate);
      for (int len = 0; len <= lmax; ++len) {
        double wlen = pmf / mass;  // renormalized length weight
        if (len == 0) {
          classes.push_back({Bag{}, wlen, 0});
        } else if (collapse) {
          detail::for_each_multiset(n, len, [&](const Bag& ms) {
            classes.push_back({ms, wlen * detail::multiset_weight(ms, n), detail::mask_of(ms)});
          });
        } else {
          double prob = wlen * std::pow(static_cast<double>(n), -len);
          detail::for_each_sequence(n, len, [&](const Bag& seq) {
            classes.push_back({seq, prob, detail::mask_of(seq)});
          });
        }
        pmf *= rate / (len + 1);
      }
      break;
    }
  }
  return classes;
}

// Scheme specification string: subbag:m, bernoulli:m, classical:m, poisson:m
// (n comes from the dataset).
inline ResamplingScheme parse_scheme(std::string_view spec, int n) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ConfigError("scheme spec must look like kind:m");
  std::string_view kind = spec.substr(0, colon);
  std::string_view mstr = spec.substr(colon + 1);
  int m = 0;
  auto [ptr, ec] = std::from_chars(mstr.data(), mstr.data() + mstr.size(), m);
  if (ec != std::errc{} || ptr != mstr.data() + mstr.size())
    throw ConfigError("scheme spec: could not parse m in '" + std::string(spec) + "'");
  if (kind == "subbag") return ResamplingScheme::subbag(n, m);
  if (kind == "bernoulli") return ResamplingScheme::bernoulli_subbag(n, m);
  if (kind == "classical") return ResamplingScheme::classical(n, m);
  if (kind == "poisson") return ResamplingScheme::poissonized(n, m);
  throw ConfigError("unknown scheme kind '" + std::string(kind) + "'");
}

}  // namespace stabl
