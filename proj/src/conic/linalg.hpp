#pragma once

#include <Eigen/Dense>

namespace causalis::conic::detail {

// Eigenvalues ascending, eigenvectors in columns.
inline void symmetric_eigen(const Eigen::MatrixXd &g, Eigen::VectorXd &values,
                            Eigen::MatrixXd &vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  values = es.eigenvalues();
  vectors = es.eigenvectors();
}

} // namespace causalis::conic::detail
