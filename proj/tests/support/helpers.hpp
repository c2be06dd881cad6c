#pragma once

// Small builders shared by the test suites.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "factorlens/data_table.hpp"
#include "factorlens/rng.hpp"

namespace testing_support {

// Table with all rows/columns active and auto-generated labels.
inline factorlens::DataTable make_table(const Eigen::MatrixXd& values) {
  factorlens::DataTable t;
  t.values = values;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    t.entities.emplace_back("r" + std::to_string(i),
                            "Row " + std::to_string(i));
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    t.attributes.push_back("c" + std::to_string(j));
  t.entity_roles.assign(static_cast<std::size_t>(values.rows()),
                        factorlens::Role::Active);
  t.attribute_roles.assign(static_cast<std::size_t>(values.cols()),
                           factorlens::Role::Active);
  return t;
}

// Random strictly positive table, entries in (0.1, 10.1).
inline Eigen::MatrixXd random_positive_matrix(Eigen::Index rows,
                                              Eigen::Index cols,
                                              factorlens::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = 0.1 + 10.0 * rng.uniform();
  return m;
}

// Random table with a sprinkling of exact zeros (margins stay positive
// because every row/column keeps at least one positive cell).
inline Eigen::MatrixXd random_sparse_matrix(Eigen::Index rows,
                                            Eigen::Index cols,
                                            factorlens::Rng& rng) {
  Eigen::MatrixXd m = random_positive_matrix(rows, cols, rng);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (rng.uniform() < 0.2 && j != i % cols) m(i, j) = 0.0;
  return m;
}

// Random rotation via Gram-Schmidt of a Gaussian matrix.
inline Eigen::MatrixXd random_rotation(Eigen::Index d, factorlens::Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // fix determinant to +1 so the motion is a proper rotation
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

}  // namespace testing_support
