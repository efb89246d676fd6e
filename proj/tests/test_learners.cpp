#include <doctest.h>

#include <cmath>

#include "stabl/learners.hpp"

using namespace stabl;

namespace {

Dataset make_data(std::initializer_list<std::initializer_list<double>> xs,
                  std::initializer_list<double> ys) {
  Dataset d;
  d.x.resize(static_cast<int>(xs.size()), static_cast<int>(xs.begin()->size()));
  d.y.resize(static_cast<int>(ys.size()));
  int r = 0;
  for (const auto& row : xs) {
    int c = 0;
    for (double v : row) d.x(r, c++) = v;
    ++r;
  }
  r = 0;
  for (double v : ys) d.y(r++) = v;
  return d;
}

Dataset permuted_rows(const Dataset& d, const std::vector<int>& order) {
  Dataset out = d;
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.x.row(static_cast<int>(j)) = d.x.row(order[j]);
    out.y(static_cast<int>(j)) = d.y(order[j]);
  }
  return out;
}

Eigen::VectorXd point(std::initializer_list<double> vs) {
  Eigen::VectorXd v(static_cast<int>(vs.size()));
  int i = 0;
  for (double x : vs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("memorizer predicts one exactly on memorized covariates") {
  Learner lrn = memorizer_learner();
  Dataset d = make_data({{1.0, 2.0}, {3.0, 4.0}}, {0.0, 1.0});
  Model m = lrn.fit(d, 0.5);
  CHECK(m.predict(point({1.0, 2.0})) == 1.0);
  CHECK(m.predict(point({3.0, 4.0})) == 1.0);
  CHECK(m.predict(point({1.0, 2.0000000001})) == 0.0);
  CHECK(m.predict(point({5.0})) == 0.0);
}

TEST_CASE("threshold voter compares the bag sum in integer arithmetic") {
  // n=10, K=3: votes 1 iff sum * 10 > m * 3
  Learner lrn = threshold_learner(10, 3);
  Eigen::VectorXd q = point({0.0});
  // m=5, sum=2: 20 > 15 -> 1
  CHECK(lrn.fit(make_data({{1.}, {1.}, {0.}, {0.}, {0.}}, {0, 0, 0, 0, 0}), .5).predict(q) == 1.0);
  // m=5, sum=1: 10 > 15 is false -> 0
  CHECK(lrn.fit(make_data({{1.}, {0.}, {0.}, {0.}, {0.}}, {0, 0, 0, 0, 0}), .5).predict(q) == 0.0);
  // exact tie m=10, sum=3: 30 > 30 is false -> 0
  Dataset tie = make_data({{1.}, {1.}, {1.}, {0.}, {0.}, {0.}, {0.}, {0.}, {0.}, {0.}},
                          {0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(lrn.fit(tie, .5).predict(q) == 0.0);
  CHECK_THROWS_AS(lrn.fit(make_data({{0.5}}, {0.0}), .5), DomainError);
  CHECK_THROWS_AS(lrn.fit(make_data({{1.0, 0.0}}, {0.0}), .5), DomainError);
}

TEST_CASE("lookup table output is deterministic, symmetric and in [0,1)") {
  Learner lrn = lookup_table_learner(99);
  Dataset d = make_data({{1.0}, {2.0}, {3.0}}, {0.0, 1.0, 0.0});
  double v = lrn.fit(d, 0.5).predict(point({0.0}));
  CHECK(v >= 0.0);
  CHECK(v < 1.0);
  CHECK(lrn.fit(d, 0.1).predict(point({7.0})) == v);  // ignores xi and x
  CHECK(lrn.fit(permuted_rows(d, {2, 0, 1}), 0.5).predict(point({0.0})) == v);
  // distinct seeds and distinct data give distinct tables
  CHECK(lookup_table_learner(100).fit(d, 0.5).predict(point({0.0})) != v);
  CHECK(lrn.fit(d.without_row(2), 0.5).predict(point({0.0})) != v);
}

TEST_CASE("logistic learner descends its objective and respects symmetry") {
  Dataset d = make_data({{1.0, 0.0}, {0.5, 1.0}, {-1.0, 0.2}, {-0.3, -0.8}}, {1.0, 1.0, 0.0, 0.0});
  const double c = 10.0;
  // recover theta by refitting with increasing budgets; objective must be
  // monotone nonincreasing along the iterate sequence
  double prev = detail::logistic_objective(d.x, d.y, c, Eigen::VectorXd::Zero(2));
  Eigen::VectorXd probe = point({0.7, -0.1});
  double prev_pred = logistic_learner(c, 0).fit(d, 0.5).predict(probe);
  CHECK(prev_pred == doctest::Approx(0.5).epsilon(1e-15));  // theta = 0
  for (int iters : {1, 2, 5, 10, 40, 160}) {
    // objective at the returned parameters, reconstructed via the logit
    Learner lrn = logistic_learner(c, iters);
    Model m = lrn.fit(d, 0.5);
    // recover theta from predictions on basis vectors
    Eigen::VectorXd theta(2);
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    theta(0) = logit(m.predict(point({1.0, 0.0})));
    theta(1) = logit(m.predict(point({0.0, 1.0})));
    double obj = detail::logistic_objective(d.x, d.y, c, theta);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  // row order must not matter
  Learner lrn = logistic_learner(c, 50);
  CHECK(lrn.fit(d, 0.5).predict(probe) ==
        doctest::Approx(lrn.fit(permuted_rows(d, {3, 1, 0, 2}), 0.5).predict(probe))
            .epsilon(1e-12));
  CHECK_THROWS_AS(lrn.fit(make_data({{1.0}}, {2.0}), 0.5), DomainError);
}

TEST_CASE("mlp gradient matches finite differences") {
  Dataset d = make_data({{0.2, -0.5}, {1.0, 0.3}, {-0.7, 0.8}, {0.1, 0.1}}, {1.0, 0.0, 1.0, 0.0});
  MlpParams p;
  SeedStream s(5, "fd");
  p.w1.resize(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) p.w1(i, j) = sample_uniform(s, -0.5, 0.5);
  p.b1 = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 3; ++i) p.b1(i) = sample_uniform(s, -0.2, 0.2);
  p.w2.resize(3);
  for (int i = 0; i < 3; ++i) p.w2(i) = sample_uniform(s, -0.5, 0.5);
  p.b2 = 0.1;

  MlpParams grad;
  mlp_loss_and_gradient(p, d.x, d.y, &grad);

  const double h = 1e-6;
  auto check_entry = [&](double* param, double analytic) {
    double orig = *param;
    *param = orig + h;
    double up = mlp_loss_and_gradient(p, d.x, d.y, nullptr);
    *param = orig - h;
    double dn = mlp_loss_and_gradient(p, d.x, d.y, nullptr);
    *param = orig;
    double fd = (up - dn) / (2.0 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) check_entry(&p.w1(i, j), grad.w1(i, j));
  for (int i = 0; i < 3; ++i) check_entry(&p.b1(i), grad.b1(i));
  for (int i = 0; i < 3; ++i) check_entry(&p.w2(i), grad.w2(i));
  check_entry(&p.b2, grad.b2);
}

TEST_CASE("mlp fits are a pure function of (data, xi)") {
  Dataset d = make_data({{0.2}, {1.0}, {-0.7}, {0.1}, {0.5}, {-0.2}}, {1, 0, 1, 0, 1, 0});
  Learner lrn = mlp_learner(4, 0.1, 3);
  Eigen::VectorXd q = point({0.3});
  double a = lrn.fit(d, 0.25).predict(q);
  CHECK(a == lrn.fit(d, 0.25).predict(q));
  CHECK(a != lrn.fit(d, 0.75).predict(q));  // xi drives init and shuffling
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
}

TEST_CASE("regression tree reproduces hand-built splits") {
  // one feature, clean split at 0.5
  Dataset d = make_data({{0.0}, {0.2}, {0.8}, {1.0}}, {1.0, 1.0, 3.0, 3.0});
  Learner lrn = tree_learner(5);
  Model m = lrn.fit(d, 0.5);
  CHECK(m.predict(point({0.1})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.predict(point({0.9})) == doctest::Approx(3.0).epsilon(1e-15));
  // depth 0: leaf mean
  CHECK(tree_learner(0).fit(d, 0.5).predict(point({0.1})) == doctest::Approx(2.0).epsilon(1e-15));
  // constant response: no split, predicts the constant everywhere
  Dataset flat = make_data({{0.0}, {1.0}}, {7.0, 7.0});
  CHECK(tree_learner(5).fit(flat, 0.5).predict(point({0.5})) == 7.0);
  // ties between identical features resolve to the lowest feature index:
  // feature 1 duplicates feature 0, split must use feature 0
  Dataset two = make_data({{0.0, 0.0}, {1.0, 1.0}}, {0.0, 1.0});
  Model m2 = tree_learner(1).fit(two, 0.5);
  CHECK(m2.predict(point({0.0, 1.0})) == 0.0);  // feature 0 decides
  CHECK(m2.predict(point({1.0, 0.0})) == 1.0);
}

TEST_CASE("learner spec strings parse") {
  CHECK(parse_learner("memorizer", 5).spec == "memorizer");
  CHECK(parse_learner("threshold:3", 10).spec == "threshold:3");
  CHECK(parse_learner("table:7", 5).spec == "table:7");
  CHECK(parse_learner("logistic:0.5,20", 5).spec == "logistic:0.5,20");
  CHECK(parse_learner("mlp:4,0.1,2", 5).spec == "mlp:4,0.1,2");
  CHECK(parse_learner("tree:3", 5).spec == "tree:3");
  CHECK_THROWS_AS(parse_learner("tree", 5), ConfigError);
  CHECK_THROWS_AS(parse_learner("tree:a", 5), ConfigError);
  CHECK_THROWS_AS(parse_learner("nope:1", 5), ConfigError);
}
