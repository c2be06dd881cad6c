#pragma once

// Clustering of row entities in full-dimensional factor coordinates:
// Ward minimum-variance agglomeration (Lance-Williams update, equi-weighted
// points) and an EII Gaussian mixture (shared spherical covariance
// lambda*I) fitted by EM, with BIC model selection over a range of K.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlens/data_table.hpp"

namespace factorlens {

struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Merge {
  int left = 0;    // node ids: leaves 0..n-1, merge m creates node n+m
  int right = 0;   // left < right
  double height = 0.0;  // increase in within-group sum of squares
  int size = 0;    // leaves under the new node
};

struct Dendrogram {
  std::vector<Merge> merges;  // length n-1, heights non-decreasing
  std::vector<std::string> leaf_labels;

  std::size_t n_leaves() const { return leaf_labels.size(); }
};

struct Partition {
  std::vector<int> labels;  // per-entity group index in 1..k
  int k = 0;
};

struct GmmFit {
  int K = 0;
  Eigen::VectorXd weights;          // pi_k, sums to 1
  Eigen::MatrixXd means;            // K x d
  double lambda = 0.0;              // shared spherical variance
  Eigen::MatrixXd responsibilities; // n x K, rows sum to 1
  std::vector<double> loglik_trace; // non-decreasing
  double bic = 0.0;                 // 2*loglik - m*log(n), larger is better
  int n_params = 0;                 // (K-1) + K*d + 1
  bool degenerate = false;          // variance hit the collapse floor

  double loglik() const {
    return loglik_trace.empty() ? 0.0 : loglik_trace.back();
  }
};

struct BicPoint {
  int K = 0;
  double bic = 0.0;
  bool degenerate = false;
};

namespace detail {

// Merge-candidate comparison: smaller cost wins; costs within kWardTieTol
// are ties, resolved toward the lexicographically smallest (left, right)
// node pair.  Implementation and test oracle share this exact rule.
inline constexpr double kWardTieTol = 1e-12;

inline bool ward_candidate_better(double cost, int left, int right,
                                  double best_cost, int best_left,
                                  int best_right) {
  if (cost < best_cost - kWardTieTol) return true;
  if (cost > best_cost + kWardTieTol) return false;
  if (left != best_left) return left < best_left;
  return right < best_right;
}

}  // namespace detail

/// Ward agglomeration of n equi-weighted points.  Heights are the Ward
/// merge cost: the increase in within-group sum of squares, so the heights
/// over the whole sequence add up to the total within-cloud sum of squares.
inline Dendrogram ward_cluster(const Eigen::MatrixXd& points,
                               const std::vector<std::string>& labels) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw ValidationError("ward_cluster needs at least 2 points");
  if (!labels.empty() && labels.size() != n)
    throw ValidationError("label count does not match point count");
  if (!points.allFinite())
    throw ValidationError("ward_cluster requires finite coordinates");

  Dendrogram dend;
  dend.leaf_labels = labels;
  if (dend.leaf_labels.empty())
    for (std::size_t i = 0; i < n; ++i)
      dend.leaf_labels.push_back(std::to_string(i));

  // Ward cost between singletons {i},{j} is ||x_i - x_j||^2 / 2.
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      cost[i][j] = cost[j][i] =
          0.5 * (points.row(static_cast<Eigen::Index>(i)) -
                 points.row(static_cast<Eigen::Index>(j)))
                    .squaredNorm();

  std::vector<int> node_id(n);
  std::vector<int> size(n, 1);
  std::vector<bool> alive(n, true);
  std::iota(node_id.begin(), node_id.end(), 0);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    int best_left = std::numeric_limits<int>::max();
    int best_right = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        const int left = std::min(node_id[i], node_id[j]);
        const int right = std::max(node_id[i], node_id[j]);
        if (detail::ward_candidate_better(cost[i][j], left, right, best_cost,
                                          best_left, best_right)) {
          best_cost = cost[i][j];
          best_left = left;
          best_right = right;
          bi = i;
          bj = j;
        }
      }
    }

    Merge m;
    m.left = best_left;
    m.right = best_right;
    m.height = best_cost;
    m.size = size[bi] + size[bj];
    dend.merges.push_back(m);

    // Lance-Williams update for the Ward criterion.
    const double na = size[bi], nb = size[bj];
    for (std::size_t c = 0; c < n; ++c) {
      if (!alive[c] || c == bi || c == bj) continue;
      const double nc = size[c];
      cost[bi][c] = cost[c][bi] =
          ((na + nc) * cost[bi][c] + (nb + nc) * cost[bj][c] -
           nc * cost[bi][bj]) /
          (na + nb + nc);
    }
    alive[bj] = false;
    size[bi] += size[bj];
    node_id[bi] = static_cast<int>(n + step);
  }
  return dend;
}

/// Partition from cutting the dendrogram into k groups: the k-1 highest
/// merges are discarded; groups are numbered 1..k by order of first leaf.
inline Partition cut(const Dendrogram& dend, std::size_t k) {
  const std::size_t n = dend.n_leaves();
  if (k < 1 || k > n) throw ValidationError("cut: k out of range");

  std::vector<int> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  // Heights are non-decreasing, so the k-1 highest merges are the last ones.
  for (std::size_t m = 0; m + k < n; ++m) {
    const int node = static_cast<int>(n + m);
    parent[find(dend.merges[m].left)] = node;
    parent[find(dend.merges[m].right)] = node;
  }

  Partition part;
  part.labels.assign(n, 0);
  std::vector<int> group_of_root(2 * n - 1, 0);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int root = find(static_cast<int>(i));
    if (group_of_root[root] == 0) group_of_root[root] = ++next;
    part.labels[i] = group_of_root[root];
  }
  part.k = next;
  return part;
}

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - m);
  return m + std::log(acc);
}

}  // namespace detail

/// EM fit of the spherical equal-volume mixture: Sigma_k = lambda I for
/// every component.  Initial responsibilities are the hard indicator of
/// `init`; iteration stops when the log-likelihood gain drops below tol.
inline GmmFit fit_eii(const Eigen::MatrixXd& points, int K,
                      const Partition& init, double tol = 1e-8,
                      int max_iter = 500) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (K < 1) throw ValidationError("fit_eii: K must be >= 1");
  if (static_cast<Eigen::Index>(K) >= n)
    throw ValidationError("fit_eii: need more points than components");
  if (!(tol > 0.0)) throw ValidationError("fit_eii: tol must be > 0");
  if (init.labels.size() != static_cast<std::size_t>(n))
    throw ValidationError("fit_eii: init partition size mismatch");

  GmmFit fit;
  fit.K = K;
  fit.n_params = (K - 1) + K * static_cast<int>(d) + 1;
  fit.responsibilities = Eigen::MatrixXd::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = init.labels[static_cast<std::size_t>(i)];
    if (g < 1 || g > K)
      throw ValidationError("fit_eii: init label out of range");
    fit.responsibilities(i, g - 1) = 1.0;
  }
  for (int k = 0; k < K; ++k)
    if (fit.responsibilities.col(k).sum() <= 0.0)
      throw ValidationError("fit_eii: empty initial group " +
                            std::to_string(k + 1));

  // Variance collapse floor, relative to the data's own spread.
  const Eigen::RowVectorXd center = points.colwise().mean();
  const double mean_sq_norm =
      (points.rowwise() - center).squaredNorm() / static_cast<double>(n);
  const double lambda_floor = 1e-12 * mean_sq_norm;

  fit.weights.resize(K);
  fit.means.resize(K, d);
  const double nd = static_cast<double>(n) * static_cast<double>(d);
  const double two_pi = 2.0 * 3.14159265358979323846;

  double prev_loglik = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // M-step from current responsibilities.
    Eigen::VectorXd nk = fit.responsibilities.colwise().sum();
    if (nk.minCoeff() <= static_cast<double>(n) * 1e-16) {
      fit.degenerate = true;
      break;
    }
    fit.weights = nk / static_cast<double>(n);
    fit.means = fit.responsibilities.transpose() * points;
    fit.means.array().colwise() /= nk.array();
    double lambda_acc = 0.0;
    for (int k = 0; k < K; ++k)
      lambda_acc += (fit.responsibilities.col(k).array() *
                     (points.rowwise() - fit.means.row(k))
                         .rowwise()
                         .squaredNorm()
                         .array())
                        .sum();
    fit.lambda = lambda_acc / nd;
    if (fit.lambda <= lambda_floor || !(fit.lambda > 0.0)) {
      fit.degenerate = true;
      break;
    }

    // E-step with log-sum-exp; also yields the observed log-likelihood.
    const double log_norm =
        -0.5 * static_cast<double>(d) * std::log(two_pi * fit.lambda);
    Eigen::MatrixXd logw(n, K);
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd sq =
          (points.rowwise() - fit.means.row(k)).rowwise().squaredNorm();
      logw.col(k) =
          Eigen::VectorXd::Constant(n, std::log(fit.weights(k)) + log_norm) -
          sq / (2.0 * fit.lambda);
    }
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double li = detail::log_sum_exp(logw.row(i).transpose());
      loglik += li;
      fit.responsibilities.row(i) = (logw.row(i).array() - li).exp().matrix();
    }
    fit.loglik_trace.push_back(loglik);
    if (loglik - prev_loglik < tol && iter > 0) break;
    prev_loglik = loglik;
  }

  fit.bic = 2.0 * fit.loglik() -
            static_cast<double>(fit.n_params) * std::log(static_cast<double>(n));
  return fit;
}

/// Hard assignment from responsibilities, renumbered 1..k by order of
/// first appearance so every group is nonempty.
inline Partition hard_partition(const GmmFit& fit) {
  Partition part;
  const Eigen::Index n = fit.responsibilities.rows();
  part.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<int> renumber(static_cast<std::size_t>(fit.K), 0);
  int next = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < fit.responsibilities.cols(); ++k)
      if (fit.responsibilities(i, k) > fit.responsibilities(i, best)) best = k;
    auto& g = renumber[static_cast<std::size_t>(best)];
    if (g == 0) g = ++next;
    part.labels[static_cast<std::size_t>(i)] = g;
  }
  part.k = next;
  return part;
}

struct ModelSelection {
  GmmFit best;
  std::vector<BicPoint> curve;
};

/// Fit EII mixtures for every K in [k_min, k_max], each initialized from
/// the Ward partition at that K, and keep the highest-BIC non-degenerate
/// fit (smallest K wins ties).
inline ModelSelection select_model(const Eigen::MatrixXd& points, int k_min,
                                   int k_max, double tol = 1e-8,
                                   int max_iter = 500) {
  const Eigen::Index n = points.rows();
  if (k_min < 1 || k_max < k_min)
    throw ValidationError("select_model: empty K range");
  if (static_cast<Eigen::Index>(k_max) >= n)
    throw ValidationError("select_model: K range exceeds n-1");

  const Dendrogram dend = ward_cluster(points, {});
  ModelSelection sel;
  bool have_best = false;
  for (int K = k_min; K <= k_max; ++K) {
    const Partition init = cut(dend, static_cast<std::size_t>(K));
    GmmFit fit = fit_eii(points, K, init, tol, max_iter);
    sel.curve.push_back({K, fit.bic, fit.degenerate});
    if (fit.degenerate) continue;
    if (!have_best || fit.bic > sel.best.bic) {
      sel.best = std::move(fit);
      have_best = true;
    }
  }
  if (!have_best)
    throw DegeneracyError("select_model: every fit in the K range collapsed");
  return sel;
}

}  // namespace factorlens
