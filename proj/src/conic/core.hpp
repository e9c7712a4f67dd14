#pragma once

#include <Eigen/Dense>
#include <vector>

namespace causalis::conic::detail {

using Eigen::Index;

// min <C, X>  s.t.  <A_i, X> = b_i,  X in (PSD blocks) x (nonnegative orthant)
// max b^T y   s.t.  C - sum_i y_i A_i = S in the same cone
struct CoreProblem {
  std::vector<Index> sizes;       // real symmetric block sides
  std::vector<Eigen::MatrixXd> A; // per block, (n*n) x m, column i = vec(A_i)
  std::vector<Eigen::MatrixXd> C; // per block, n x n
  Eigen::MatrixXd Alp;            // nlp x m
  Eigen::VectorXd clp;
  Eigen::VectorXd b;

  Index m() const { return b.size(); }
};

struct CoreSolution {
  std::vector<Eigen::MatrixXd> X, S;
  Eigen::VectorXd xlp, slp, y;
  double pobj = 0, dobj = 0;
  double pinf = 0, dinf = 0, gap = 0;
  int iterations = 0;
  bool converged = false;
};

CoreSolution solve_core(const CoreProblem &p, int max_iterations, double tol);

} // namespace causalis::conic::detail
