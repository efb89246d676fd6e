#pragma once

#include <cmath>
#include <vector>

#include "stabl/common.hpp"

namespace stabl {

// Inputs for the closed-form bounds.
struct BoundParams {
  int n = 0;
  double p = 0.0;
  double q = 0.0;

  void validate() const {
    if (n < 2) throw DomainError("bound params: n must be >= 2");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("bound params: p must lie in (0,1)");
    if (q < 0.0) throw DomainError("bound params: q must be >= 0");
    if (q > p * (1.0 - p) / (n - 1) + 1e-12)
      throw DomainError("bound params: q exceeds p(1-p)/(n-1)");
  }
};

// c = (1/4n)(p/(1-p) + q/(1-p)^2); the bagged algorithm is (eps, delta)-stable
// whenever delta * eps^2 >= c.
inline double stability_threshold(const BoundParams& params) {
  params.validate();
  const double omp = 1.0 - params.p;
  return (params.p / omp + params.q / (omp * omp)) / (4.0 * params.n);
}

inline double guaranteed_delta(const BoundParams& params, double eps) {
  if (!(eps > 0.0)) throw DomainError("guaranteed_delta: eps must be > 0");
  return stability_threshold(params) / (eps * eps);
}

inline double guaranteed_epsilon(const BoundParams& params, double delta) {
  if (!(delta > 0.0)) throw DomainError("guaranteed_epsilon: delta must be > 0");
  return std::sqrt(stability_threshold(params) / delta);
}

// Additive Monte Carlo inflation: finite-B bagging is
// (eps + sqrt((2/B) ln(4/d')), delta + d')-stable.
inline double finite_b_inflation(long bags, double dprime) {
  if (bags < 1) throw DomainError("finite_b_inflation: B must be >= 1");
  if (!(dprime > 0.0 && dprime < 1.0)) throw DomainError("finite_b_inflation: d' must be in (0,1)");
  return std::sqrt(2.0 / bags * std::log(4.0 / dprime));
}

inline double log_binom(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P{H = h} for H ~ HyperGeometric(N, K, m), via log-gamma so phase diagrams
// at n ~ 1e4 do not overflow.
inline double hypergeometric_pmf(long population, long successes, long draws, long h) {
  if (population < 0 || successes < 0 || successes > population || draws < 0 ||
      draws > population)
    throw DomainError("hypergeometric_pmf: invalid parameters");
  if (h < 0 || h > draws || h > successes || draws - h > population - successes) return 0.0;
  double logp = log_binom(successes, h) + log_binom(population - successes, draws - h) -
                log_binom(population, draws);
  return std::exp(logp);
}

namespace detail {

// floor(n*delta) with exact intent: products within 1e-9 of an integer snap to
// it, so that e.g. delta = 0.3, n = 10 yields 3 despite 0.3 having no exact
// binary representation.
inline long floor_scaled(int n, double delta) {
  double r = static_cast<double>(n) * delta;
  long k = static_cast<long>(std::floor(r));
  if (r - k > 1.0 - 1e-9) ++k;
  return k;
}

}  // namespace detail

// K = 1 + floor(n*delta): number of ones-rows in the canonical tightness
// dataset.
inline long tightness_k(int n, double delta) { return 1 + detail::floor_scaled(n, delta); }

// Subbagging the threshold voter is not (eps, delta)-stable for any eps below
// (1 - delta - 1/n) * p * P{H = floor(p(1+floor(n delta)))},
// H ~ HyperGeometric(n-1, floor(n delta), m). The floor is computed as the
// integer division m*K/n.
inline double lower_bound_epsilon(int n, int m, double delta) {
  if (m < 1 || m >= n) throw DomainError("lower_bound_epsilon: requires 1 <= m < n");
  if (!(delta > 0.0 && delta < 0.5))
    throw DomainError("lower_bound_epsilon: requires delta in (0, 1/2)");
  const long k = tightness_k(n, delta);
  const long h = (static_cast<long>(m) * k) / n;
  const double p = static_cast<double>(m) / n;
  return (1.0 - delta - 1.0 / n) * p * hypergeometric_pmf(n - 1, k - 1, m, h);
}

// The exact leave-one-out gap of the subbagged threshold voter for each of the
// K ones-rows: ((m - floor(mK/n)) / n) * P{H = floor(mK/n)},
// H ~ HyperGeometric(n-1, K-1, m). Always >= lower_bound_epsilon.
inline double sharp_gap_closed_form(int n, int m, double delta) {
  if (m < 1 || m >= n) throw DomainError("sharp_gap_closed_form: requires 1 <= m < n");
  if (!(delta > 0.0 && delta < 0.5))
    throw DomainError("sharp_gap_closed_form: requires delta in (0, 1/2)");
  const long k = tightness_k(n, delta);
  const long h = (static_cast<long>(m) * k) / n;
  return (static_cast<double>(m - h) / n) * hypergeometric_pmf(n - 1, k - 1, m, h);
}

// Stirling approximation to the tightness threshold:
// (1/sqrt(2 pi n)) sqrt(((1-delta)/delta) (p/(1-p))).
inline double lower_bound_epsilon_stirling(int n, int m, double delta) {
  const double p = static_cast<double>(m) / n;
  return std::sqrt(((1.0 - delta) / delta) * (p / (1.0 - p)) / (2.0 * M_PI * n));
}

// beta_{n,m,B} = sqrt(c) + sqrt(2 pi / B); infinite B drops the second term.
inline double expectation_beta(const BoundParams& params, double bags = INFINITY) {
  if (!(bags >= 1.0)) throw DomainError("expectation_beta: B must be >= 1 (or infinite)");
  double beta = std::sqrt(stability_threshold(params));
  if (!std::isinf(bags)) beta += std::sqrt(2.0 * M_PI / bags);
  return beta;
}

// Lipschitz-loss hypothesis stability level L * beta, and the replace-one
// level 2 L * beta.
inline double hypothesis_stability_level(const BoundParams& params, double lipschitz,
                                         double bags = INFINITY) {
  return lipschitz * expectation_beta(params, bags);
}

inline double replace_one_stability_level(const BoundParams& params, double lipschitz,
                                          double bags = INFINITY) {
  return 2.0 * lipschitz * expectation_beta(params, bags);
}

// C(Q_n)^{2/max(k,2)} p^{1-2/max(k,2)} with C(Q_n) = min{sqrt(c), p};
// k -> inf returns p.
inline double lk_bound(const BoundParams& params, double k) {
  if (!(k > 0.0)) throw DomainError("lk_bound: k must be > 0");
  const double c_qn = std::min(std::sqrt(stability_threshold(params)), params.p);
  if (c_qn > params.p) throw DomainError("lk_bound: theorem hypothesis C(Q_n) <= p violated");
  if (std::isinf(k)) return params.p;
  const double e = 2.0 / std::max(k, 2.0);
  return std::pow(c_qn, e) * std::pow(params.p, 1.0 - e);
}

enum class CurveKind { GuaranteeBoundary, TightnessBoundary };

// (delta, eps) boundary points for the phase diagram.
struct TheoryCurve {
  CurveKind kind;
  std::vector<double> delta;
  std::vector<double> epsilon;
};

inline std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) throw DomainError("log_spaced_grid: bad grid");
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1));
  return grid;
}

// Guarantee boundary eps = sqrt(c/delta) with subbagging (p, q), and the
// tightness boundary from the hypergeometric closed form, over a delta grid
// in (0, 1/2).
inline std::pair<TheoryCurve, TheoryCurve> phase_diagram(int n, int m,
                                                         const std::vector<double>& delta_grid) {
  if (m < 1 || m >= n) throw DomainError("phase_diagram: requires 1 <= m < n");
  BoundParams params;
  params.n = n;
  params.p = static_cast<double>(m) / n;
  params.q = params.p * (1.0 - params.p) / (n - 1);
  TheoryCurve guarantee{CurveKind::GuaranteeBoundary, {}, {}};
  TheoryCurve tightness{CurveKind::TightnessBoundary, {}, {}};
  for (double delta : delta_grid) {
    if (!(delta > 0.0 && delta < 0.5))
      throw DomainError("phase_diagram: delta grid must lie in (0, 1/2)");
    guarantee.delta.push_back(delta);
    guarantee.epsilon.push_back(guaranteed_epsilon(params, delta));
    tightness.delta.push_back(delta);
    tightness.epsilon.push_back(lower_bound_epsilon(n, m, delta));
  }
  return {guarantee, tightness};
}

}  // namespace stabl
