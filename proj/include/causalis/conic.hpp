#pragma once

#include "causalis/tensor.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace causalis::conic {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class VarKind { psd, nonneg, free };

struct Var {
  std::size_t id = 0;
};

struct VarInfo {
  std::string name;
  VarKind kind = VarKind::free;
  Index n = 1; // side length for psd variables

  Index coords() const { return kind == VarKind::psd ? n * n : 1; }
};

struct ProgramError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Affine expression valued in k x k Hermitian matrices, k = 1 for reals.
// Terms and offset are expressed in hermitian_coords.
class Expr {
public:
  Expr() : Expr(1) {}
  explicit Expr(Index k) : k_(k), offset_(Eigen::VectorXd::Zero(k * k)) {}

  static Expr constant(const MatrixC &h);
  static Expr constant(double v);
  // identity image of a variable with the given coordinate count
  static Expr variable(Var v, Index side);
  // scalar variable times a fixed Hermitian matrix
  static Expr scaled(Var scalar, const MatrixC &h);
  // Re Tr(h X) for a psd variable X of side h.rows()
  static Expr inner(const MatrixC &h, Var x);

  Index dim() const { return k_; }
  const std::vector<std::pair<std::size_t, SparseMatrix>> &terms() const {
    return terms_;
  }
  const Eigen::VectorXd &offset() const { return offset_; }

  Expr &operator+=(const Expr &o);
  Expr &operator-=(const Expr &o);
  Expr &operator*=(double s);
  friend Expr operator+(Expr a, const Expr &b) { return a += b; }
  friend Expr operator-(Expr a, const Expr &b) { return a -= b; }
  friend Expr operator*(double s, Expr a) { return a *= s; }
  friend Expr operator-(Expr a) { return a *= -1.0; }

  // Push every term through a linear map on coordinates (k'^2 x k^2).
  Expr mapped(const SparseMatrix &map, Index new_k) const;

private:
  void add_term(std::size_t id, const SparseMatrix &coef);

  Index k_;
  std::vector<std::pair<std::size_t, SparseMatrix>> terms_;
  std::unordered_map<std::size_t, std::size_t> slot_;
  Eigen::VectorXd offset_;
};

// Matrix of a Hermitian-preserving linear map in hermitian_coords.
SparseMatrix superoperator(Index n_in, Index n_out,
                           const std::function<MatrixC(const MatrixC &)> &f);

// Trace of a k x k Hermitian-valued expression.
Expr trace(const Expr &e);

struct Constraint {
  Expr lhs;
  Eigen::VectorXd rhs; // coordinates of the target
};

class Program {
public:
  Var add_psd(Index n, std::string name = {});
  Var add_nonneg(std::string name = {});
  Var add_free(std::string name = {});

  Expr operator()(Var v) const;

  std::size_t add_equality(const Expr &lhs, const MatrixC &rhs);
  std::size_t add_equality(const Expr &lhs, double rhs);
  void minimize(const Expr &objective);
  void maximize(const Expr &objective);

  const std::vector<VarInfo> &variables() const { return vars_; }
  const std::vector<Constraint> &constraints() const { return cons_; }
  const std::optional<Expr> &objective() const { return objective_; }
  bool maximizing() const { return maximize_; }
  const VarInfo &info(Var v) const;

private:
  void check(const Expr &e) const;

  std::vector<VarInfo> vars_;
  std::vector<Constraint> cons_;
  std::optional<Expr> objective_;
  bool maximize_ = false;
};

enum class Status { optimal, infeasible, numerical_failure };

const char *to_string(Status s);

struct Residuals {
  double primal_eq = 0;
  double dual_eq = 0;
  double gap = 0;
};

struct SolverOptions {
  int max_iterations = 200; // CAUSALIS_SOLVER_MAXITER overrides
  double tolerance = 1e-8;
  double feasible_slack = -1e-7;
  double certificate_violation = 1e-6;

  static SolverOptions from_environment();
};

struct SolveReport {
  Status status = Status::numerical_failure;
  double objective_value = 0;
  // Optimal/feasible: variable values. Infeasible: empty.
  std::vector<Eigen::VectorXd> primal;
  // Optimal: multipliers u with c = A^T u + Z.
  // Infeasible: Farkas ray v with A^T v = Z >= 0, b^T v < 0, Tr Z = 1.
  std::vector<Eigen::VectorXd> dual;
  std::vector<Eigen::VectorXd> conic_dual; // Z per variable (zero for free)
  Residuals residuals;
  double slack = 0;                 // lambda* for feasibility programs
  double certificate_violation = 0; // -b^T v for infeasible programs
  int iterations = 0;
  bool feasibility_mode = false;

  MatrixC matrix(const Program &p, Var v) const;
  double value(Var v) const;
  MatrixC multiplier(const Program &p, std::size_t constraint) const;
  MatrixC conic_dual_matrix(const Program &p, Var v) const;
};

SolveReport solve(const Program &program,
                  const SolverOptions &options = SolverOptions::from_environment());
SolveReport solve_lp(const Program &program,
                     const SolverOptions &options = SolverOptions::from_environment());

// [[Re, -Im], [Im, Re]] embedding of a complex matrix and its inverse.
Eigen::MatrixXd real_embedding(const MatrixC &m);
MatrixC complex_from_embedding(const Eigen::MatrixXd &m);

} // namespace causalis::conic
