#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stabl/common.hpp"
#include "stabl/learners.hpp"
#include "stabl/resampling.hpp"
#include "stabl/rng.hpp"

namespace stabl {

struct MonteCarloMode {
  long bags = 10000;
  std::uint64_t master_seed = 0;
};

struct ExactMode {
  std::size_t limit = 1'000'000;
  int xi_quadrature = 64;  // nodes for E_xi on randomized learners
};

using BagMode = std::variant<MonteCarloMode, ExactMode>;

enum class ClipRule { EmpiricalRange, TrimmedRange };

// Maps a dataset to the clipping interval I(D).
struct IntervalMap {
  ClipRule rule = ClipRule::EmpiricalRange;
  int trim = 1;  // k for TrimmedRange

  std::array<double, 2> interval(const Dataset& data) const {
    const int n = data.n();
    if (n == 0) throw DomainError("interval map: empty dataset");
    std::vector<double> ys(data.y.data(), data.y.data() + n);
    std::sort(ys.begin(), ys.end());
    int k = (rule == ClipRule::EmpiricalRange) ? 1 : trim;
    if (k < 1) throw DomainError("interval map: requires k >= 1");
    if (rule == ClipRule::TrimmedRange && 2 * k >= n)
      throw DomainError("interval map: TrimmedRange requires k < n/2");
    // order statistics Y_(k), Y_(n+1-k), 1-based
    return {ys[k - 1], ys[n - k]};
  }

  std::string spec_string() const {
    return rule == ClipRule::EmpiricalRange ? "range" : ("trim:" + std::to_string(trim));
  }
};

inline double clip_to(double v, const std::array<double, 2>& iv) {
  return std::max(iv[0], std::min(v, iv[1]));
}

struct BaggedPredictor {
  Learner learner;
  ResamplingScheme scheme;
  BagMode mode;
  std::optional<IntervalMap> clip;

  std::string mode_string() const {
    if (const auto* mc = std::get_if<MonteCarloMode>(&mode))
      return "mc:B=" + std::to_string(mc->bags) + ",seed=" + std::to_string(mc->master_seed);
    const auto& ex = std::get<ExactMode>(mode);
    return "exact:limit=" + std::to_string(ex.limit) +
           ",quadrature=" + std::to_string(ex.xi_quadrature);
  }
};

namespace detail {

// E_xi[A(D_r; xi)(x)] for one bag, by fixed midpoint quadrature over xi.
// Deterministic learners bypass the quadrature.
inline double bag_prediction(const Learner& learner, const Dataset& data, const Bag& bag,
                             const Eigen::VectorXd& x, int quadrature) {
  Dataset sub = data.subset(bag);
  if (learner.deterministic) return learner.fit(sub, 0.5).predict(x);
  KahanSum acc;
  for (int j = 0; j < quadrature; ++j) {
    double xi = (j + 0.5) / quadrature;
    acc.add(learner.fit(sub, xi).predict(x));
  }
  return acc.value() / quadrature;
}

}  // namespace detail

// Enumerated support of Q_n together with the per-class xi-averaged
// prediction. Computed once, then reused for the full prediction, all n
// leave-one-out conditionals, the bag variance and clipped variants.
struct ExactEvaluation {
  std::vector<BagClass> support;
  std::vector<double> predictions;
};

inline ExactEvaluation evaluate_exact(const Learner& learner, const ResamplingScheme& scheme,
                                      const Dataset& data, const Eigen::VectorXd& x,
                                      const ExactMode& mode) {
  if (scheme.n() != data.n()) throw ConfigError("scheme population size must match dataset size");
  SupportOptions opt;
  opt.collapse_symmetric = learner.symmetric;
  opt.limit = mode.limit;
  ExactEvaluation ev;
  ev.support = enumerate_support(scheme, opt);
  ev.predictions.reserve(ev.support.size());
  for (const BagClass& cls : ev.support)
    ev.predictions.push_back(
        detail::bag_prediction(learner, data, cls.representative, x, mode.xi_quadrature));
  return ev;
}

inline double weighted_mean(const ExactEvaluation& ev) {
  KahanSum num, den;
  for (std::size_t c = 0; c < ev.support.size(); ++c) {
    num.add(ev.support[c].probability * ev.predictions[c]);
    den.add(ev.support[c].probability);
  }
  return num.value() / den.value();
}

// f_inf(x) = E_{r,xi}[A(D_r; xi)(x)], exact over the enumerated support.
inline double predict_exact(const BaggedPredictor& pred, const Dataset& data,
                            const Eigen::VectorXd& x) {
  const auto& mode = std::get<ExactMode>(pred.mode);
  return weighted_mean(evaluate_exact(pred.learner, pred.scheme, data, x, mode));
}

// f_B(x) = (1/B) sum_b A(D_{r_b}; xi_b)(x). Bags and seeds come from streams
// keyed (master_seed, "bag"/"xi", b); the average is a fixed-order pairwise
// reduction.
inline double predict_finite(const BaggedPredictor& pred, const Dataset& data,
                             const Eigen::VectorXd& x) {
  const auto& mc = std::get<MonteCarloMode>(pred.mode);
  if (mc.bags < 1) throw ConfigError("Monte Carlo mode requires B >= 1");
  if (pred.scheme.n() != data.n())
    throw ConfigError("scheme population size must match dataset size");
  std::vector<double> terms;
  terms.reserve(mc.bags);
  std::optional<std::array<double, 2>> clip_iv;
  if (pred.clip) clip_iv = pred.clip->interval(data);
  for (long b = 0; b < mc.bags; ++b) {
    SeedStream bag_stream(mc.master_seed, "bag", static_cast<std::uint64_t>(b));
    SeedStream xi_stream(mc.master_seed, "xi", static_cast<std::uint64_t>(b));
    Bag bag = sample_bag(pred.scheme, bag_stream);
    Dataset sub = data.subset(bag);
    double v;
    try {
      v = pred.learner.fit(sub, xi_stream.next_unit()).predict(x);
    } catch (const std::exception& e) {
      throw DomainError("learner fit failed on bag " + std::to_string(b) + ": " + e.what());
    }
    if (clip_iv) v = clip_to(v, *clip_iv);
    terms.push_back(v);
  }
  return pairwise_sum(terms) / static_cast<double>(mc.bags);
}

// All n leave-one-out predictions in one pass: entry i is the conditional
// average over bags excluding i, which equals running the exact engine on
// (D \ i, drop_one_scheme). The optional per-index clip intervals implement
// the adaptively clipped variant, where bag predictions for the i-th
// leave-one-out model are clipped to I(D \ i).
inline Eigen::VectorXd loo_from_evaluation(const ExactEvaluation& ev, int n,
                                           const std::vector<std::array<double, 2>>* clip_loo =
                                               nullptr) {
  std::vector<KahanSum> num(n), den(n);
  for (std::size_t c = 0; c < ev.support.size(); ++c) {
    const BagClass& cls = ev.support[c];
    for (int i = 0; i < n; ++i) {
      if (cls.member_mask & (std::uint64_t{1} << i)) continue;
      double v = clip_loo ? clip_to(ev.predictions[c], (*clip_loo)[i]) : ev.predictions[c];
      num[i].add(cls.probability * v);
      den[i].add(cls.probability);
    }
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    if (den[i].value() <= 0.0)
      throw DomainError("degenerate scheme: p = 1, conditioning event has probability 0");
    out(i) = num[i].value() / den[i].value();
  }
  return out;
}

inline Eigen::VectorXd loo_predictions_exact(const BaggedPredictor& pred, const Dataset& data,
                                             const Eigen::VectorXd& x) {
  const auto& mode = std::get<ExactMode>(pred.mode);
  if (inclusion_probability(pred.scheme) >= 1.0)
    throw DomainError("degenerate scheme: p = 1, leave-one-out conditioning impossible");
  ExactEvaluation ev = evaluate_exact(pred.learner, pred.scheme, data, x, mode);
  return loo_from_evaluation(ev, data.n());
}

// Adaptively clipped prediction: per-bag predictions clipped to I(D) computed
// on the full dataset, then averaged. In exact mode clipping applies to the
// per-bag mean-over-xi prediction; in Monte Carlo mode to the realized
// prediction.
inline double predict_clipped(const BaggedPredictor& pred, const Dataset& data,
                              const Eigen::VectorXd& x) {
  if (!pred.clip) throw ConfigError("predict_clipped: no clip rule configured");
  if (const auto* mode = std::get_if<ExactMode>(&pred.mode)) {
    auto iv = pred.clip->interval(data);
    ExactEvaluation ev = evaluate_exact(pred.learner, pred.scheme, data, x, *mode);
    KahanSum num, den;
    for (std::size_t c = 0; c < ev.support.size(); ++c) {
      num.add(ev.support[c].probability * clip_to(ev.predictions[c], iv));
      den.add(ev.support[c].probability);
    }
    return num.value() / den.value();
  }
  return predict_finite(pred, data, x);  // clips per realized bag
}

struct BagVariance {
  double variance = 0.0;
  double r_star = 0.0;  // 2 sqrt(variance)
  double range = 0.0;   // max - min per-bag prediction over the support
};

// Exact variance of the per-bag (xi-averaged) predictions under Q_n, and the
// derived scale R* = 2 sqrt(Var) <= Range.
inline BagVariance bag_variance_exact(const BaggedPredictor& pred, const Dataset& data,
                                      const Eigen::VectorXd& x) {
  const auto& mode = std::get<ExactMode>(pred.mode);
  ExactEvaluation ev = evaluate_exact(pred.learner, pred.scheme, data, x, mode);
  double mean = weighted_mean(ev);
  KahanSum var, den;
  double lo = ev.predictions.empty() ? 0.0 : ev.predictions[0];
  double hi = lo;
  for (std::size_t c = 0; c < ev.support.size(); ++c) {
    double dvt = ev.predictions[c] - mean;
    var.add(ev.support[c].probability * dvt * dvt);
    den.add(ev.support[c].probability);
    lo = std::min(lo, ev.predictions[c]);
    hi = std::max(hi, ev.predictions[c]);
  }
  BagVariance out;
  out.variance = std::max(0.0, var.value() / den.value());
  out.r_star = 2.0 * std::sqrt(out.variance);
  out.range = hi - lo;
  return out;
}

}  // namespace stabl
