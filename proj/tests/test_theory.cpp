#include <doctest.h>

#include <cmath>

#include "stabl/bagging.hpp"
#include "stabl/stability.hpp"
#include "stabl/theory.hpp"

using namespace stabl;

namespace {

// Canonical tightness dataset: K ones then n-K zeros, scalar binary covariates.
Dataset canonical_dataset(int n, long k) {
  Dataset d;
  d.x.resize(n, 1);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = (i < k) ? 1.0 : 0.0;
    d.y(i) = 0.0;
  }
  return d;
}

}  // namespace

TEST_CASE("guarantee threshold spot values") {
  BoundParams subbag_half{500, 0.5, 1.0 / 1996.0};
  CHECK(stability_threshold(subbag_half) == doctest::Approx(0.000501002004008016).epsilon(1e-12));
  CHECK(guaranteed_epsilon(subbag_half, 0.05) == doctest::Approx(0.10010015025).epsilon(1e-9));
  CHECK(guaranteed_delta(subbag_half, 0.1) ==
        doctest::Approx(0.000501002004008016 / 0.01).epsilon(1e-12));
  // q = 0 variant drops the second term
  BoundParams no_q{500, 0.5, 0.0};
  CHECK(stability_threshold(no_q) == doctest::Approx(1.0 / 2000.0).epsilon(1e-12));
}

TEST_CASE("bound parameter validation") {
  CHECK_THROWS_AS(stability_threshold(BoundParams{1, 0.5, 0.0}), DomainError);
  CHECK_THROWS_AS(stability_threshold(BoundParams{10, 0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(stability_threshold(BoundParams{10, 1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(stability_threshold(BoundParams{10, 0.5, 0.1}), DomainError);  // q too large
  CHECK_THROWS_AS(guaranteed_epsilon(BoundParams{10, 0.5, 0.0}, 0.0), DomainError);
  CHECK_THROWS_AS(finite_b_inflation(0, 0.05), DomainError);
  CHECK_THROWS_AS(finite_b_inflation(100, 1.5), DomainError);
}

TEST_CASE("full threshold is dominated by the simplified n-1 form") {
  // with the subbagging deficit q = p(1-p)/(n-1),
  // c <= (1/(4(n-1))) p/(1-p)
  for (int n : {5, 20, 100}) {
    for (int m = 1; m < n; ++m) {
      double p = static_cast<double>(m) / n;
      BoundParams params{n, p, p * (1.0 - p) / (n - 1)};
      CHECK(stability_threshold(params) <= p / (1.0 - p) / (4.0 * (n - 1)) + 1e-15);
    }
  }
}

TEST_CASE("monte carlo inflation spot value") {
  CHECK(finite_b_inflation(10000, 0.05) == doctest::Approx(0.029604143746).epsilon(1e-9));
  // shrinks with B, grows as d' shrinks
  CHECK(finite_b_inflation(100, 0.05) > finite_b_inflation(1000, 0.05));
  CHECK(finite_b_inflation(1000, 0.01) > finite_b_inflation(1000, 0.05));
}

TEST_CASE("hypergeometric pmf: hand value, support, normalization") {
  CHECK(hypergeometric_pmf(9, 2, 5, 1) == doctest::Approx(70.0 / 126.0).epsilon(1e-12));
  CHECK(hypergeometric_pmf(9, 2, 5, 3) == 0.0);   // h > successes
  CHECK(hypergeometric_pmf(9, 2, 5, -1) == 0.0);
  CHECK(hypergeometric_pmf(5, 5, 3, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(hypergeometric_pmf(5, 6, 3, 1), DomainError);
  for (long pop : {6L, 9L, 12L}) {
    for (long succ = 0; succ <= pop; ++succ) {
      for (long draws = 0; draws <= pop; ++draws) {
        double total = 0.0;
        for (long h = 0; h <= draws; ++h) total += hypergeometric_pmf(pop, succ, draws, h);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("tightness K snaps floor(n delta) despite binary rounding") {
  CHECK(tightness_k(10, 0.3) == 4);   // 10*0.3 = 2.9999... in binary
  CHECK(tightness_k(10, 0.2) == 3);
  CHECK(tightness_k(500, 0.05) == 26);
  CHECK(tightness_k(7, 0.1) == 1);
}

TEST_CASE("tightness threshold and sharp gap hand values at n=10, m=5, delta=0.2") {
  CHECK(lower_bound_epsilon(10, 5, 0.2) == doctest::Approx(0.7 * 0.5 * 70.0 / 126.0).epsilon(1e-13));
  CHECK(sharp_gap_closed_form(10, 5, 0.2) == doctest::Approx(2.0 / 9.0).epsilon(1e-13));
  CHECK_THROWS_AS(lower_bound_epsilon(10, 10, 0.2), DomainError);
  CHECK_THROWS_AS(lower_bound_epsilon(10, 5, 0.6), DomainError);
}

TEST_CASE("sharp gap matches the brute-force audit of the threshold voter") {
  for (int n : {6, 8, 10, 12}) {
    for (double delta : {0.1, 0.2, 0.3, 0.4}) {
      const int m = n / 2;
      const long k = tightness_k(n, delta);
      if (k >= n) continue;
      Dataset d = canonical_dataset(n, k);
      BaggedPredictor pred{threshold_learner(n, static_cast<int>(k)),
                           ResamplingScheme::subbag(n, m), ExactMode{}, std::nullopt};
      StabilityProfile profile = audit(pred, d, Eigen::VectorXd::Zero(1));
      const double gap = sharp_gap_closed_form(n, m, delta);
      // every ones-row has exactly the closed-form perturbation
      for (long i = 0; i < k; ++i)
        CHECK(profile.perturbations(i) == doctest::Approx(gap).epsilon(1e-11));
      // and the gap dominates the tightness threshold
      CHECK(gap >= lower_bound_epsilon(n, m, delta) - 1e-13);
      // more than a delta-fraction of rows reaches the gap
      CHECK(static_cast<double>(k) / n > delta);
    }
  }
}

TEST_CASE("stirling approximation tracks the exact tightness threshold") {
  // at n=500, m=250 the relative error is below 1% for moderate delta
  for (double delta : {0.1, 0.2, 0.3}) {
    double exact = lower_bound_epsilon(500, 250, delta);
    double approx = lower_bound_epsilon_stirling(500, 250, delta);
    CHECK(std::abs(approx / exact - 1.0) < 0.05);
  }
}

TEST_CASE("expectation beta spot value and limits") {
  BoundParams params{500, 0.5, 1.0 / 1996.0};
  CHECK(expectation_beta(params, 1e4) == doctest::Approx(0.04744935679810226).epsilon(1e-10));
  CHECK(expectation_beta(params) ==
        doctest::Approx(std::sqrt(0.000501002004008016)).epsilon(1e-12));
  CHECK(hypothesis_stability_level(params, 2.0, 1e4) ==
        doctest::Approx(2.0 * 0.04744935679810226).epsilon(1e-10));
  CHECK(replace_one_stability_level(params, 2.0, 1e4) ==
        doctest::Approx(4.0 * 0.04744935679810226).epsilon(1e-10));
  CHECK_THROWS_AS(expectation_beta(params, 0.5), DomainError);
}

TEST_CASE("lk bound interpolates between sqrt(c) and p") {
  BoundParams params{100, 0.5, 0.0};
  const double c_qn = std::min(std::sqrt(stability_threshold(params)), params.p);
  CHECK(lk_bound(params, 2.0) == doctest::Approx(c_qn).epsilon(1e-12));
  CHECK(lk_bound(params, 1.0) == doctest::Approx(c_qn).epsilon(1e-12));  // k<2 behaves as k=2
  CHECK(lk_bound(params, 0.5) == doctest::Approx(c_qn).epsilon(1e-12));
  CHECK(lk_bound(params, INFINITY) == doctest::Approx(params.p).epsilon(1e-15));
  // monotone nondecreasing in k
  double prev = 0.0;
  for (double k : {2.0, 3.0, 4.0, 8.0, 64.0}) {
    double b = lk_bound(params, k);
    CHECK(b >= prev - 1e-15);
    prev = b;
  }
  CHECK(prev <= params.p + 1e-15);
  CHECK_THROWS_AS(lk_bound(params, 0.0), DomainError);
}

TEST_CASE("phase diagram keeps the guarantee boundary above the tightness boundary") {
  auto grid = log_spaced_grid(0.01, 0.45, 40);
  auto [guarantee, tightness] = phase_diagram(500, 250, grid);
  REQUIRE(guarantee.delta.size() == grid.size());
  REQUIRE(tightness.delta.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(guarantee.delta[i] == grid[i]);
    CHECK(guarantee.epsilon[i] > tightness.epsilon[i]);
  }
  CHECK_THROWS_AS(log_spaced_grid(0.0, 1.0, 10), DomainError);
  CHECK_THROWS_AS(phase_diagram(10, 5, std::vector<double>{0.7}), DomainError);
}
