#pragma once

// Correspondence Analysis of an active entity x attribute table:
// decomposition of the standardized residual matrix, principal
// coordinates under the chi-squared metric, contribution/correlation
// diagnostics, and passive projection of supplementary rows/columns.
//
// Axis indices in the public operations are 1-based.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "factorlens/data_table.hpp"

namespace factorlens {

enum class Side { Row, Column };

struct CaResult {
  std::vector<std::string> row_labels;  // active entities
  std::vector<std::string> col_labels;  // active attributes
  Eigen::VectorXd row_masses;           // r, sums to 1
  Eigen::VectorXd col_masses;           // c, sums to 1
  Eigen::VectorXd sigma;                // singular values, descending
  Eigen::VectorXd lambda;               // principal inertias sigma^2
  double total_inertia = 0.0;           // chi-squared statistic / grand total
  Eigen::MatrixXd row_coords;           // F, I x K principal coordinates
  Eigen::MatrixXd col_coords;           // G, J x K
  Eigen::MatrixXd row_ctr;              // contributions, columns sum to 1
  Eigen::MatrixXd col_ctr;
  Eigen::MatrixXd row_cos2;             // squared correlations, row sums <= 1
  Eigen::MatrixXd col_cos2;
  std::vector<int> axis_signs;          // +-1 applied to the raw SVD axes

  std::size_t n_factors() const {
    return static_cast<std::size_t>(sigma.size());
  }

  // Axes with positive inertia (trailing factors may be exact zeros).
  std::size_t n_positive_factors() const {
    std::size_t k = 0;
    while (k < n_factors() && lambda(static_cast<Eigen::Index>(k)) > 0.0) ++k;
    return k;
  }
};

/// A row or column projected into an existing solution without
/// influencing it.
struct SupplementaryPoint {
  std::string label;
  Side kind = Side::Column;
  Eigen::VectorXd coords;  // principal coordinates on each factor
  Eigen::VectorXd cos2;    // share of the point's own profile distance
};

namespace detail {

// Relative floor under which singular values are truncated to exact zero.
inline constexpr double kSigmaRelTol = 1e-12;
// If the leading singular value is below this, the table is independent up
// to rounding and the decomposition is reported as having zero factors.
inline constexpr double kSigmaAbsTol = 1e-14;
// Squared profile distances below this are treated as "point at centroid".
inline constexpr double kCentroidTol = 1e-20;

}  // namespace detail

/// Decompose the active part of the table.  Pure function; the result is
/// immutable and safe to share across threads.
inline CaResult analyze(const DataTable& t) {
  validate(t);
  const auto rows = t.active_rows();
  const auto cols = t.active_cols();
  const Eigen::Index I = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index J = static_cast<Eigen::Index>(cols.size());

  CaResult res;
  for (std::size_t i : rows) res.row_labels.push_back(t.entities[i].first);
  for (std::size_t j : cols) res.col_labels.push_back(t.attributes[j]);

  // Correspondence matrix and margins.
  Eigen::MatrixXd P(I, J);
  for (Eigen::Index i = 0; i < I; ++i)
    for (Eigen::Index j = 0; j < J; ++j)
      P(i, j) = t.values(rows[static_cast<std::size_t>(i)],
                         cols[static_cast<std::size_t>(j)]);
  const double grand = P.sum();
  P /= grand;
  res.row_masses = P.rowwise().sum();
  res.col_masses = P.colwise().sum().transpose();

  // Standardized residuals S = D_r^{-1/2} (P - r c^T) D_c^{-1/2}.
  Eigen::MatrixXd S(I, J);
  for (Eigen::Index i = 0; i < I; ++i)
    for (Eigen::Index j = 0; j < J; ++j)
      S(i, j) = (P(i, j) - res.row_masses(i) * res.col_masses(j)) /
                std::sqrt(res.row_masses(i) * res.col_masses(j));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index K = std::min(I - 1, J - 1);

  res.sigma.resize(K);
  for (Eigen::Index k = 0; k < K; ++k)
    res.sigma(k) = std::min(svd.singularValues()(k), 1.0);
  const double sigma1 = K > 0 ? res.sigma(0) : 0.0;
  if (sigma1 < detail::kSigmaAbsTol) {
    res.sigma.setZero();
  } else {
    for (Eigen::Index k = 0; k < K; ++k)
      if (res.sigma(k) < detail::kSigmaRelTol * sigma1) res.sigma(k) = 0.0;
  }
  res.lambda = res.sigma.array().square();
  res.total_inertia = res.lambda.sum();

  // Principal coordinates F = D_r^{-1/2} U Sigma, G = D_c^{-1/2} V Sigma.
  res.row_coords.resize(I, K);
  res.col_coords.resize(J, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    res.row_coords.col(k) = (svd.matrixU().col(k).array() * res.sigma(k) /
                             res.row_masses.array().sqrt())
                                .matrix();
    res.col_coords.col(k) = (svd.matrixV().col(k).array() * res.sigma(k) /
                             res.col_masses.array().sqrt())
                                .matrix();
  }

  // Contributions CTR(i,k) = mass_i coord(i,k)^2 / lambda_k.
  res.row_ctr = Eigen::MatrixXd::Zero(I, K);
  res.col_ctr = Eigen::MatrixXd::Zero(J, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (res.lambda(k) <= 0.0) continue;
    res.row_ctr.col(k) = (res.row_masses.array() *
                          res.row_coords.col(k).array().square() /
                          res.lambda(k))
                             .matrix();
    res.col_ctr.col(k) = (res.col_masses.array() *
                          res.col_coords.col(k).array().square() /
                          res.lambda(k))
                             .matrix();
  }

  // Canonical axis signs: the active column with the largest contribution
  // gets a positive coordinate, ties to the lowest column index.
  res.axis_signs.assign(static_cast<std::size_t>(K), 1);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (res.lambda(k) <= 0.0) continue;
    Eigen::Index j_top = 0;
    for (Eigen::Index j = 1; j < J; ++j)
      if (res.col_ctr(j, k) > res.col_ctr(j_top, k)) j_top = j;
    if (res.col_coords(j_top, k) < 0.0) {
      res.axis_signs[static_cast<std::size_t>(k)] = -1;
      res.row_coords.col(k) = -res.row_coords.col(k);
      res.col_coords.col(k) = -res.col_coords.col(k);
    }
  }

  // Squared correlations against the point's full-dimensional profile
  // distance; points at the centroid get a zero vector.
  res.row_cos2 = Eigen::MatrixXd::Zero(I, K);
  res.col_cos2 = Eigen::MatrixXd::Zero(J, K);
  for (Eigen::Index i = 0; i < I; ++i) {
    const double d2 = res.row_coords.row(i).squaredNorm();
    if (d2 > detail::kCentroidTol)
      res.row_cos2.row(i) =
          (res.row_coords.row(i).array().square() / d2).matrix();
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    const double d2 = res.col_coords.row(j).squaredNorm();
    if (d2 > detail::kCentroidTol)
      res.col_cos2.row(j) =
          (res.col_coords.row(j).array().square() / d2).matrix();
  }
  return res;
}

/// Share of total inertia carried by 1-based axis k, in percent.
inline double inertia_percent(const CaResult& res, std::size_t k) {
  if (k < 1 || k > res.n_factors())
    throw ValidationError("axis index out of range");
  if (res.total_inertia <= 0.0) return 0.0;
  return 100.0 * res.lambda(static_cast<Eigen::Index>(k - 1)) /
         res.total_inertia;
}

/// Contributions to axis k, sorted descending (ties by label).
inline std::vector<std::pair<std::string, double>> contributions(
    const CaResult& res, Side side, std::size_t k) {
  if (k < 1 || k > res.n_factors())
    throw ValidationError("axis index out of range");
  const Eigen::Index kk = static_cast<Eigen::Index>(k - 1);
  if (res.lambda(kk) <= 0.0)
    throw ValidationError("axis " + std::to_string(k) + " has zero inertia");
  const auto& labels = side == Side::Row ? res.row_labels : res.col_labels;
  const auto& ctr = side == Side::Row ? res.row_ctr : res.col_ctr;
  std::vector<std::pair<std::string, double>> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.emplace_back(labels[i], ctr(static_cast<Eigen::Index>(i), kk));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

/// Squared correlations of one labeled point with every axis.
inline Eigen::VectorXd cos2(const CaResult& res, Side side,
                            std::string_view label) {
  const auto& labels = side == Side::Row ? res.row_labels : res.col_labels;
  const auto& mat = side == Side::Row ? res.row_cos2 : res.col_cos2;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label)
      return mat.row(static_cast<Eigen::Index>(i)).transpose();
  throw ValidationError("unknown label '" + std::string(label) + "'");
}

/// Chi-squared distance between two active row profiles.
inline double chi2_row_distance(const DataTable& t, std::size_t i1,
                                std::size_t i2) {
  if (i1 >= t.n_entities() || i2 >= t.n_entities())
    throw ValidationError("entity index out of range");
  if (t.entity_roles[i1] != Role::Active || t.entity_roles[i2] != Role::Active)
    throw ValidationError("chi-squared distance requires active rows");
  const auto rows = t.active_rows();
  const auto cols = t.active_cols();
  std::vector<double> colsum(cols.size(), 0.0);
  double grand = 0.0;
  for (std::size_t i : rows)
    for (std::size_t jj = 0; jj < cols.size(); ++jj) {
      colsum[jj] += t.values(i, cols[jj]);
      grand += t.values(i, cols[jj]);
    }
  const double s1 = t.active_row_sum(i1);
  const double s2 = t.active_row_sum(i2);
  double acc = 0.0;
  for (std::size_t jj = 0; jj < cols.size(); ++jj) {
    const double cj = colsum[jj] / grand;
    const double diff =
        t.values(i1, cols[jj]) / s1 - t.values(i2, cols[jj]) / s2;
    acc += diff * diff / cj;
  }
  return std::sqrt(acc);
}

/// Project a supplementary row or column into the solution via the
/// transition formula.  The label must carry the supplementary role and
/// have a positive total over the active margin.
inline SupplementaryPoint project_supplementary(const CaResult& res,
                                                const DataTable& t,
                                                std::string_view label) {
  SupplementaryPoint sp;
  sp.label = std::string(label);
  const Eigen::Index K = static_cast<Eigen::Index>(res.n_factors());
  sp.coords = Eigen::VectorXd::Zero(K);
  sp.cos2 = Eigen::VectorXd::Zero(K);

  const std::ptrdiff_t jcol = t.find_attribute(label);
  const std::ptrdiff_t irow = jcol < 0 ? t.find_entity(label) : -1;
  if (jcol < 0 && irow < 0)
    throw ValidationError("unknown label '" + sp.label + "'");

  double d2 = 0.0;
  if (jcol >= 0) {
    const auto j = static_cast<std::size_t>(jcol);
    if (t.attribute_roles[j] != Role::Supplementary)
      throw ValidationError("attribute '" + sp.label + "' is not supplementary");
    sp.kind = Side::Column;
    const auto rows = t.active_rows();
    KahanSum total_k;
    for (std::size_t i : rows) {
      const double v = t.values(i, j);
      if (detail::is_missing(v))
        throw ValidationError("projection skipped: attribute '" + sp.label +
                              "' has missing values");
      total_k.add(v);
    }
    const double total = total_k.value();
    if (!(total > 0.0))
      throw ValidationError("projection refused: attribute '" + sp.label +
                            "' has nonpositive total " +
                            detail::format_double(total));
    // coords_k = (1/sigma_k) sum_i p_i F_ik
    for (Eigen::Index k = 0; k < K; ++k) {
      if (res.sigma(k) <= 0.0) continue;
      double acc = 0.0;
      for (std::size_t ii = 0; ii < rows.size(); ++ii)
        acc += (t.values(rows[ii], j) / total) *
               res.row_coords(static_cast<Eigen::Index>(ii), k);
      sp.coords(k) = acc / res.sigma(k);
    }
    for (std::size_t ii = 0; ii < rows.size(); ++ii) {
      const double p = t.values(rows[ii], j) / total;
      const double r = res.row_masses(static_cast<Eigen::Index>(ii));
      d2 += (p - r) * (p - r) / r;
    }
  } else {
    const auto i = static_cast<std::size_t>(irow);
    if (t.entity_roles[i] != Role::Supplementary)
      throw ValidationError("entity '" + sp.label + "' is not supplementary");
    sp.kind = Side::Row;
    const auto cols = t.active_cols();
    KahanSum total_k;
    for (std::size_t j : cols) {
      const double v = t.values(i, j);
      if (detail::is_missing(v))
        throw ValidationError("projection skipped: entity '" + sp.label +
                              "' has missing values");
      total_k.add(v);
    }
    const double total = total_k.value();
    if (!(total > 0.0))
      throw ValidationError("projection refused: entity '" + sp.label +
                            "' has nonpositive total " +
                            detail::format_double(total));
    for (Eigen::Index k = 0; k < K; ++k) {
      if (res.sigma(k) <= 0.0) continue;
      double acc = 0.0;
      for (std::size_t jj = 0; jj < cols.size(); ++jj)
        acc += (t.values(i, cols[jj]) / total) *
               res.col_coords(static_cast<Eigen::Index>(jj), k);
      sp.coords(k) = acc / res.sigma(k);
    }
    for (std::size_t jj = 0; jj < cols.size(); ++jj) {
      const double q = t.values(i, cols[jj]) / total;
      const double c = res.col_masses(static_cast<Eigen::Index>(jj));
      d2 += (q - c) * (q - c) / c;
    }
  }

  if (d2 > detail::kCentroidTol)
    for (Eigen::Index k = 0; k < K; ++k)
      sp.cos2(k) = std::clamp(sp.coords(k) * sp.coords(k) / d2, 0.0, 1.0);
  return sp;
}

/// Projections for every supplementary attribute and entity; columns or
/// rows that cannot be projected are skipped with a note in `skipped`.
inline std::vector<SupplementaryPoint> project_all_supplementary(
    const CaResult& res, const DataTable& t,
    std::vector<std::string>* skipped = nullptr) {
  std::vector<SupplementaryPoint> out;
  auto try_project = [&](const std::string& label) {
    try {
      out.push_back(project_supplementary(res, t, label));
    } catch (const ValidationError& e) {
      if (skipped) skipped->push_back(e.what());
    }
  };
  for (std::size_t j = 0; j < t.n_attributes(); ++j)
    if (t.attribute_roles[j] == Role::Supplementary)
      try_project(t.attributes[j]);
  for (std::size_t i = 0; i < t.n_entities(); ++i)
    if (t.entity_roles[i] == Role::Supplementary)
      try_project(t.entities[i].first);
  return out;
}

}  // namespace factorlens
