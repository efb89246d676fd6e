#pragma once

#include <Eigen/Dense>
#include <array>
#include <charconv>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stabl/common.hpp"
#include "stabl/resampling.hpp"
#include "stabl/rng.hpp"

namespace stabl {

// Training data. Row order is semantically meaningful; base algorithms need
// not be symmetric.
struct Dataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;  // n

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }

  Dataset subset(const Bag& bag) const {
    Dataset out;
    out.x.resize(static_cast<int>(bag.size()), x.cols());
    out.y.resize(static_cast<int>(bag.size()));
    for (std::size_t j = 0; j < bag.size(); ++j) {
      if (bag[j] < 1 || bag[j] > n()) throw DomainError("bag index out of range");
      out.x.row(static_cast<int>(j)) = x.row(bag[j] - 1);
      out.y(static_cast<int>(j)) = y(bag[j] - 1);
    }
    return out;
  }

  // Dataset with 1-based row `i` removed.
  Dataset without_row(int i) const {
    if (i < 1 || i > n()) throw DomainError("row index out of range");
    Dataset out;
    out.x.resize(x.rows() - 1, x.cols());
    out.y.resize(y.size() - 1);
    int k = 0;
    for (int r = 0; r < n(); ++r) {
      if (r == i - 1) continue;
      out.x.row(k) = x.row(r);
      out.y(k) = y(r);
      ++k;
    }
    return out;
  }

  Dataset with_row_replaced(int i, const Eigen::VectorXd& xr, double yr) const {
    if (i < 1 || i > n()) throw DomainError("row index out of range");
    if (xr.size() != x.cols()) throw DomainError("replacement row has wrong dimension");
    Dataset out = *this;
    out.x.row(i - 1) = xr.transpose();
    out.y(i - 1) = yr;
    return out;
  }
};

struct Model {
  std::function<double(const Eigen::VectorXd&)> predict;
};

// Black-box base algorithm A(D; xi). `fit` must be a pure deterministic
// function of (dataset, xi). Deterministic learners ignore xi entirely, which
// lets the exact engine skip the xi-quadrature.
struct Learner {
  std::function<Model(const Dataset&, double xi)> fit;
  bool symmetric = false;
  bool deterministic = true;
  std::optional<std::array<double, 2>> output_range;
  std::string spec;
};

namespace detail {

inline std::uint64_t hash_double(double v, std::uint64_t h) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return mix64(h ^ mix64(bits));
}

// Order-independent hash of the rows of a dataset (content identity, exact bits).
inline std::uint64_t multiset_row_hash(const Dataset& data) {
  std::uint64_t sum = 0;
  for (int r = 0; r < data.n(); ++r) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (int c = 0; c < data.d(); ++c) h = hash_double(data.x(r, c), h);
    h = hash_double(data.y(r), h);
    sum += h;  // commutative combine
  }
  return sum;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace detail

// Predicts 1 iff the query covariate exactly (bitwise) equals some training
// covariate.
inline Learner memorizer_learner() {
  Learner lrn;
  lrn.symmetric = true;
  lrn.deterministic = true;
  lrn.output_range = {{0.0, 1.0}};
  lrn.spec = "memorizer";
  lrn.fit = [](const Dataset& data, double) {
    auto rows = std::make_shared<std::vector<Eigen::VectorXd>>();
    rows->reserve(data.n());
    for (int r = 0; r < data.n(); ++r) rows->push_back(data.x.row(r).transpose());
    return Model{[rows](const Eigen::VectorXd& q) {
      for (const auto& row : *rows) {
        if (row.size() == q.size() &&
            std::memcmp(row.data(), q.data(), sizeof(double) * q.size()) == 0)
          return 1.0;
      }
      return 0.0;
    }};
  };
  return lrn;
}

// Threshold voter: predicts 1 iff the sum of training covariates in the bag
// exceeds m*K/n, with m the bag length at fit time and (n, K) fixed learner
// parameters. Covariates must be scalars in {0,1}. The comparison
// sum > m*K/n is done in integer arithmetic as sum*n > m*K.
inline Learner threshold_learner(int n, int k) {
  if (n < 1 || k < 0) throw ConfigError("threshold learner: requires n >= 1 and K >= 0");
  Learner lrn;
  lrn.symmetric = true;
  lrn.deterministic = true;
  lrn.output_range = {{0.0, 1.0}};
  lrn.spec = "threshold:" + std::to_string(k);
  lrn.fit = [n, k](const Dataset& data, double) {
    if (data.d() != 1) throw DomainError("threshold learner: covariates must be scalars");
    long long sum = 0;
    for (int r = 0; r < data.n(); ++r) {
      double v = data.x(r, 0);
      if (v != 0.0 && v != 1.0) throw DomainError("threshold learner: covariates must be binary");
      sum += static_cast<long long>(v);
    }
    const long long m = data.n();
    double out = (sum * n > m * static_cast<long long>(k)) ? 1.0 : 0.0;
    return Model{[out](const Eigen::VectorXd&) { return out; }};
  };
  return lrn;
}

// Randomized test oracle: the prediction ignores x and is a deterministic hash
// of the multiset of training-row contents, mapped into [0,1).
inline Learner lookup_table_learner(std::uint64_t seed) {
  Learner lrn;
  lrn.symmetric = true;
  lrn.deterministic = true;
  lrn.output_range = {{0.0, 1.0}};
  lrn.spec = "table:" + std::to_string(seed);
  lrn.fit = [seed](const Dataset& data, double) {
    std::uint64_t h = detail::mix64(detail::multiset_row_hash(data) ^ detail::mix64(seed));
    double out = static_cast<double>(h >> 11) * 0x1.0p-53;
    return Model{[out](const Eigen::VectorXd&) { return out; }};
  };
  return lrn;
}

namespace detail {

// Objective of l2-regularized logistic regression:
//   C * sum_i cross_entropy(sigmoid(x_i' theta), y_i) + ||theta||^2 / 2.
inline double logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
                                 const Eigen::VectorXd& theta) {
  Eigen::VectorXd z = x * theta;
  double loss = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    // -y log sigma(z) - (1-y) log(1 - sigma(z)), stable form
    double zi = z(i);
    loss += (zi > 0 ? zi : 0.0) - y(i) * zi + std::log1p(std::exp(-std::abs(zi)));
  }
  return c * loss + 0.5 * theta.squaredNorm();
}

}  // namespace detail

// Full-gradient descent on the regularized logistic objective, fixed iteration
// budget, step 1/L with L an upper bound on the objective's smoothness.
inline Learner logistic_learner(double c, int max_iter) {
  if (c < 0.0 || max_iter < 0) throw ConfigError("logistic learner: c >= 0 and iters >= 0");
  Learner lrn;
  lrn.symmetric = true;
  lrn.deterministic = true;
  lrn.output_range = {{0.0, 1.0}};
  lrn.spec = "logistic:" + format_double(c) + "," + std::to_string(max_iter);
  lrn.fit = [c, max_iter](const Dataset& data, double) {
    for (int i = 0; i < data.n(); ++i)
      if (data.y(i) != 0.0 && data.y(i) != 1.0)
        throw DomainError("logistic learner: responses must be in {0,1}");
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.d());
    const double smoothness = c * data.x.squaredNorm() / 4.0 + 1.0;
    const double step = 1.0 / smoothness;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd z = data.x * theta;
      Eigen::VectorXd resid = z.unaryExpr([](double t) { return detail::sigmoid(t); }) - data.y;
      Eigen::VectorXd grad = c * (data.x.transpose() * resid) + theta;
      theta -= step * grad;
    }
    auto th = std::make_shared<Eigen::VectorXd>(std::move(theta));
    return Model{[th](const Eigen::VectorXd& q) { return detail::sigmoid(q.dot(*th)); }};
  };
  return lrn;
}

// One-hidden-layer network parameters: tanh hidden units, logistic output.
struct MlpParams {
  Eigen::MatrixXd w1;  // h x d
  Eigen::VectorXd b1;  // h
  Eigen::VectorXd w2;  // h
  double b2 = 0.0;
};

namespace detail {

inline double mlp_forward(const MlpParams& p, const Eigen::VectorXd& q) {
  Eigen::VectorXd hid = (p.w1 * q + p.b1).array().tanh();
  return sigmoid(p.w2.dot(hid) + p.b2);
}

}  // namespace detail

// Mean cross-entropy loss over `rows` of the data, and its gradient.
// Exposed so tests can check the gradient against finite differences.
inline double mlp_loss_and_gradient(const MlpParams& p, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y, MlpParams* grad) {
  const int nb = static_cast<int>(x.rows());
  Eigen::MatrixXd pre = (p.w1 * x.transpose()).colwise() + p.b1;  // h x nb
  Eigen::MatrixXd hid = pre.array().tanh();
  Eigen::VectorXd out(nb);
  for (int j = 0; j < nb; ++j) out(j) = detail::sigmoid(p.w2.dot(hid.col(j)) + p.b2);
  double loss = 0.0;
  for (int j = 0; j < nb; ++j) {
    double o = std::min(std::max(out(j), 1e-15), 1.0 - 1e-15);
    loss += -y(j) * std::log(o) - (1.0 - y(j)) * std::log(1.0 - o);
  }
  loss /= nb;
  if (grad) {
    Eigen::VectorXd dout = (out - y) / nb;                      // nb
    grad->w2 = hid * dout;                                      // h
    grad->b2 = dout.sum();
    Eigen::MatrixXd dhid = (p.w2 * dout.transpose()).array() * (1.0 - hid.array().square());
    grad->w1 = dhid * x;                                        // h x d
    grad->b1 = dhid.rowwise().sum();
  }
  return loss;
}

// One-hidden-layer network trained with mini-batch SGD. All initialization and
// batch shuffling derive deterministically from xi.
inline Learner mlp_learner(int hidden, double lr, int epochs) {
  if (hidden < 1 || lr <= 0.0 || epochs < 0) throw ConfigError("mlp learner: bad hyperparameters");
  Learner lrn;
  lrn.symmetric = false;  // batch order follows row order
  lrn.deterministic = false;
  lrn.output_range = {{0.0, 1.0}};
  lrn.spec = "mlp:" + std::to_string(hidden) + "," + format_double(lr) + "," +
             std::to_string(epochs);
  lrn.fit = [hidden, lr, epochs](const Dataset& data, double xi) {
    for (int i = 0; i < data.n(); ++i)
      if (data.y(i) != 0.0 && data.y(i) != 1.0)
        throw DomainError("mlp learner: responses must be in {0,1}");
    // Expand the scalar seed into a stream for init and shuffling.
    std::uint64_t xi_bits;
    std::memcpy(&xi_bits, &xi, sizeof(xi_bits));
    SeedStream stream(xi_bits, "mlp", 0);
    const int d = data.d();
    auto p = std::make_shared<MlpParams>();
    const double bound1 = std::sqrt(6.0 / (d + hidden));
    const double bound2 = std::sqrt(6.0 / (hidden + 1));
    p->w1.resize(hidden, d);
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < d; ++j) p->w1(i, j) = sample_uniform(stream, -bound1, bound1);
    p->b1 = Eigen::VectorXd::Zero(hidden);
    p->w2.resize(hidden);
    for (int i = 0; i < hidden; ++i) p->w2(i) = sample_uniform(stream, -bound2, bound2);
    p->b2 = 0.0;

    const int n = data.n();
    const int batch = std::min(32, n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    MlpParams grad;
    Eigen::MatrixXd bx(batch, d);
    Eigen::VectorXd by(batch);
    for (int ep = 0; ep < epochs; ++ep) {
      for (int j = n - 1; j > 0; --j)
        std::swap(order[j], order[stream.next_below(static_cast<std::uint64_t>(j + 1))]);
      for (int start = 0; start + batch <= n; start += batch) {
        for (int j = 0; j < batch; ++j) {
          bx.row(j) = data.x.row(order[start + j]);
          by(j) = data.y(order[start + j]);
        }
        mlp_loss_and_gradient(*p, bx, by, &grad);
        p->w1 -= lr * grad.w1;
        p->b1 -= lr * grad.b1;
        p->w2 -= lr * grad.w2;
        p->b2 -= lr * grad.b2;
      }
    }
    return Model{[p](const Eigen::VectorXd& q) { return detail::mlp_forward(*p, q); }};
  };
  return lrn;
}

namespace detail {

struct TreeNode {
  int feature = -1;       // -1: leaf
  double threshold = 0.0;
  double value = 0.0;     // leaf mean
  int left = -1, right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::VectorXd& q) const {
    int idx = 0;
    while (nodes[idx].feature >= 0)
      idx = (q(nodes[idx].feature) <= nodes[idx].threshold) ? nodes[idx].left : nodes[idx].right;
    return nodes[idx].value;
  }
};

inline int build_tree(Tree& tree, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      std::vector<int>& rows, int depth, int max_depth) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  const int nr = static_cast<int>(rows.size());
  double mean = 0.0;
  for (int r : rows) mean += y(r);
  mean /= nr;
  double sse = 0.0;
  for (int r : rows) sse += (y(r) - mean) * (y(r) - mean);
  tree.nodes[node_id].value = mean;
  if (depth >= max_depth || nr < 2 || sse <= 0.0) return node_id;

  // Greedy variance-reduction split; candidates are midpoints between
  // consecutive distinct values. Scanning features and thresholds in
  // ascending order with a strict improvement keeps the lowest-index,
  // lowest-threshold split among ties.
  int best_feature = -1;
  double best_threshold = 0.0;
  double best_sse = sse;
  std::vector<std::pair<double, double>> vals(nr);
  for (int f = 0; f < x.cols(); ++f) {
    for (int j = 0; j < nr; ++j) vals[j] = {x(rows[j], f), y(rows[j])};
    std::sort(vals.begin(), vals.end());
    double left_sum = 0.0, left_sq = 0.0;
    double total_sum = 0.0, total_sq = 0.0;
    for (auto& [v, yv] : vals) {
      total_sum += yv;
      total_sq += yv * yv;
    }
    for (int j = 0; j < nr - 1; ++j) {
      left_sum += vals[j].second;
      left_sq += vals[j].second * vals[j].second;
      if (vals[j].first == vals[j + 1].first) continue;
      int nl = j + 1, nrr = nr - nl;
      double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
      double split_sse = (left_sq - left_sum * left_sum / nl) +
                         (right_sq - right_sum * right_sum / nrr);
      if (split_sse < best_sse - 1e-12 * (1.0 + std::abs(sse))) {
        best_sse = split_sse;
        best_feature = f;
        best_threshold = 0.5 * (vals[j].first + vals[j + 1].first);
      }
    }
  }
  if (best_feature < 0) return node_id;

  std::vector<int> left_rows, right_rows;
  for (int r : rows)
    (x(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
  tree.nodes[node_id].feature = best_feature;
  tree.nodes[node_id].threshold = best_threshold;
  int l = build_tree(tree, x, y, left_rows, depth + 1, max_depth);
  int r = build_tree(tree, x, y, right_rows, depth + 1, max_depth);
  tree.nodes[node_id].left = l;
  tree.nodes[node_id].right = r;
  return node_id;
}

}  // namespace detail

// CART-style axis-aligned regression tree: greedy variance-reduction splits,
// leaf-mean prediction. No declared output range (leaf means stay inside the
// response range, but the contract leaves it open for the unbounded machinery).
inline Learner tree_learner(int max_depth) {
  if (max_depth < 0) throw ConfigError("tree learner: depth must be >= 0");
  Learner lrn;
  lrn.symmetric = true;
  lrn.deterministic = true;
  lrn.spec = "tree:" + std::to_string(max_depth);
  lrn.fit = [max_depth](const Dataset& data, double) {
    if (data.n() == 0) throw DomainError("tree learner: empty dataset");
    auto tree = std::make_shared<detail::Tree>();
    std::vector<int> rows(data.n());
    std::iota(rows.begin(), rows.end(), 0);
    detail::build_tree(*tree, data.x, data.y, rows, 0, max_depth);
    return Model{[tree](const Eigen::VectorXd& q) { return tree->predict(q); }};
  };
  return lrn;
}

// Learner specification strings: memorizer, threshold:K, table:seed,
// logistic:c,iters, mlp:h,lr,epochs, tree:depth. `n` is the dataset size
// (needed by the threshold learner).
inline Learner parse_learner(std::string_view spec, int n) {
  auto colon = spec.find(':');
  std::string_view name = spec.substr(0, colon == std::string_view::npos ? spec.size() : colon);
  std::vector<std::string> args;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      args.emplace_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto want = [&](std::size_t k) {
    if (args.size() != k)
      throw ConfigError("learner spec '" + std::string(spec) + "': expected " + std::to_string(k) +
                        " parameter(s)");
  };
  try {
    if (name == "memorizer") {
      want(0);
      return memorizer_learner();
    }
    if (name == "threshold") {
      want(1);
      return threshold_learner(n, std::stoi(args[0]));
    }
    if (name == "table") {
      want(1);
      return lookup_table_learner(std::stoull(args[0]));
    }
    if (name == "logistic") {
      want(2);
      return logistic_learner(std::stod(args[0]), std::stoi(args[1]));
    }
    if (name == "mlp") {
      want(3);
      return mlp_learner(std::stoi(args[0]), std::stod(args[1]), std::stoi(args[2]));
    }
    if (name == "tree") {
      want(1);
      return tree_learner(std::stoi(args[0]));
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("learner spec '" + std::string(spec) + "': bad numeric parameter");
  }
  throw ConfigError("unknown learner '" + std::string(name) + "'");
}

}  // namespace stabl
