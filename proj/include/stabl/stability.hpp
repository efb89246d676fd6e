#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stabl/bagging.hpp"
#include "stabl/common.hpp"

namespace stabl {

// Leave-one-out perturbations L_i = |f(x) - f^{\i}(x)| at one test point.
struct StabilityProfile {
  Eigen::VectorXd perturbations;  // entry i-1 belongs to training row i
  int n = 0;
  std::string scheme_desc;
  std::string mode_desc;
  std::string point_desc;
  double hoeffding_halfwidth = 0.0;  // Monte Carlo audits only
  double hoeffding_dprime = 0.0;
};

namespace detail {

inline std::uint64_t loo_seed(std::uint64_t master_seed, int i, const char* purpose) {
  return mix64(master_seed ^ mix64(static_cast<std::uint64_t>(i) ^ hash_label(purpose)));
}

}  // namespace detail

// Full stability audit: the bagged prediction and all n leave-one-out
// predictions. Exact mode uses one-pass conditional averaging over the
// enumerated support; Monte Carlo mode runs n independent re-bags with
// independent streams keyed by (master_seed, i).
inline StabilityProfile audit(const BaggedPredictor& pred, const Dataset& data,
                              const Eigen::VectorXd& x) {
  if (data.n() < 2) throw DomainError("audit: requires n >= 2");
  StabilityProfile profile;
  profile.n = data.n();
  profile.scheme_desc = pred.scheme.spec_string();
  profile.mode_desc = pred.mode_string();

  if (const auto* mode = std::get_if<ExactMode>(&pred.mode)) {
    if (inclusion_probability(pred.scheme) >= 1.0)
      throw DomainError("degenerate scheme: p = 1, leave-one-out conditioning impossible");
    ExactEvaluation ev = evaluate_exact(pred.learner, pred.scheme, data, x, *mode);
    double full;
    Eigen::VectorXd loo;
    if (pred.clip) {
      auto iv = pred.clip->interval(data);
      KahanSum num, den;
      for (std::size_t c = 0; c < ev.support.size(); ++c) {
        num.add(ev.support[c].probability * clip_to(ev.predictions[c], iv));
        den.add(ev.support[c].probability);
      }
      full = num.value() / den.value();
      std::vector<std::array<double, 2>> loo_iv(data.n());
      for (int i = 1; i <= data.n(); ++i) loo_iv[i - 1] = pred.clip->interval(data.without_row(i));
      loo = loo_from_evaluation(ev, data.n(), &loo_iv);
    } else {
      full = weighted_mean(ev);
      loo = loo_from_evaluation(ev, data.n());
    }
    profile.perturbations = (loo.array() - full).abs();
  } else {
    const auto& mc = std::get<MonteCarloMode>(pred.mode);
    double full = predict_finite(pred, data, x);
    profile.perturbations.resize(data.n());
    ResamplingScheme loo_scheme = drop_one_scheme(pred.scheme);
    for (int i = 1; i <= data.n(); ++i) {
      BaggedPredictor loo_pred = pred;
      loo_pred.scheme = loo_scheme;
      loo_pred.mode = MonteCarloMode{mc.bags, detail::loo_seed(mc.master_seed, i, "loo")};
      profile.perturbations(i - 1) = std::abs(predict_finite(loo_pred, data.without_row(i), x) - full);
    }
    profile.hoeffding_dprime = 0.05;
    profile.hoeffding_halfwidth =
        std::sqrt(std::log(4.0 / profile.hoeffding_dprime) / (2.0 * mc.bags));
  }
  return profile;
}

// delta_emp(eps) = (1/n) #{i : L_i > eps} (strict) or >= eps (non-strict).
// Theory-facing checks use the non-strict variant.
inline double delta_of_epsilon(const StabilityProfile& profile, double eps, bool strict) {
  if (eps < 0.0) throw DomainError("delta_of_epsilon: eps must be >= 0");
  int count = 0;
  for (int i = 0; i < profile.n; ++i) {
    double v = profile.perturbations(i);
    if (strict ? (v > eps) : (v >= eps)) ++count;
  }
  return static_cast<double>(count) / profile.n;
}

// One step of the delta(eps) step function: at eps the strict fraction drops
// from `delta_below` (left limit, = non-strict fraction at eps) to `delta_at`.
struct CurveBreakpoint {
  double epsilon;
  double delta_below;
  double delta_at;
};

// The full delta(eps) step function: sorted unique perturbation values with
// descending delta.
inline std::vector<CurveBreakpoint> epsilon_curve(const StabilityProfile& profile) {
  std::vector<double> vals(profile.perturbations.data(),
                           profile.perturbations.data() + profile.n);
  std::sort(vals.begin(), vals.end());
  std::vector<CurveBreakpoint> curve;
  for (std::size_t j = 0; j < vals.size();) {
    std::size_t k = j;
    while (k < vals.size() && vals[k] == vals[j]) ++k;
    curve.push_back({vals[j], static_cast<double>(profile.n - j) / profile.n,
                     static_cast<double>(profile.n - k) / profile.n});
    j = k;
  }
  return curve;
}

struct ProfileSummary {
  double worst_case;
  double mean;
  double lk_norm;
};

// max_i L_i, mean_i L_i, and ((1/n) sum L_i^k)^{1/k}; k = inf gives the max.
inline ProfileSummary summaries(const StabilityProfile& profile, double k) {
  if (!(k > 0.0)) throw DomainError("summaries: norm order k must be > 0");
  ProfileSummary s{};
  s.worst_case = profile.perturbations.maxCoeff();
  s.mean = profile.perturbations.mean();
  if (std::isinf(k)) {
    s.lk_norm = s.worst_case;
  } else {
    double acc = 0.0;
    for (int i = 0; i < profile.n; ++i) acc += std::pow(profile.perturbations(i), k);
    s.lk_norm = std::pow(acc / profile.n, 1.0 / k);
  }
  return s;
}

// sup over eps > 0 of eps^2 * delta_emp^{>=}(eps); attained at a perturbation
// value, so it is a finite max over the profile.
inline double sup_eps2_delta(const StabilityProfile& profile) {
  double best = 0.0;
  for (const CurveBreakpoint& bp : epsilon_curve(profile))
    best = std::max(best, bp.epsilon * bp.epsilon * bp.delta_below);
  return best;
}

// Replace-one perturbations |f(x) - f^{(i)}(x)| where row i is replaced by
// the i-th replacement row and the same scheme Q_n is re-bagged.
inline StabilityProfile replace_one_audit(const BaggedPredictor& pred, const Dataset& data,
                                          const Dataset& replacements, const Eigen::VectorXd& x) {
  if (replacements.n() != data.n())
    throw DomainError("replace_one_audit: need one replacement row per training row");
  if (replacements.d() != data.d())
    throw DomainError("replace_one_audit: replacement rows have wrong dimension");
  auto predict = [&](const Dataset& d, std::uint64_t seed_tweak) {
    if (std::holds_alternative<ExactMode>(pred.mode))
      return pred.clip ? predict_clipped(pred, d, x) : predict_exact(pred, d, x);
    BaggedPredictor p = pred;
    auto mc = std::get<MonteCarloMode>(pred.mode);
    mc.master_seed = detail::loo_seed(mc.master_seed, static_cast<int>(seed_tweak), "replace");
    p.mode = mc;
    return predict_finite(p, d, x);
  };
  StabilityProfile profile;
  profile.n = data.n();
  profile.scheme_desc = pred.scheme.spec_string();
  profile.mode_desc = pred.mode_string();
  double full = predict(data, 0);
  profile.perturbations.resize(data.n());
  for (int i = 1; i <= data.n(); ++i) {
    Dataset repl = data.with_row_replaced(i, replacements.x.row(i - 1).transpose(),
                                          replacements.y(i - 1));
    profile.perturbations(i - 1) = std::abs(predict(repl, static_cast<std::uint64_t>(i)) - full);
  }
  return profile;
}

// delta_I: exact fraction of i whose removal changes the interval I(D).
inline double interval_instability(const Dataset& data, const IntervalMap& rule) {
  if (data.n() < 2) throw DomainError("interval_instability: requires n >= 2");
  auto full = rule.interval(data);
  int changed = 0;
  for (int i = 1; i <= data.n(); ++i) {
    auto iv = rule.interval(data.without_row(i));
    if (iv[0] != full[0] || iv[1] != full[1]) ++changed;
  }
  return static_cast<double>(changed) / data.n();
}

}  // namespace stabl
