#include "causalis/conic.hpp"

#include <cstdlib>

namespace causalis::conic {

namespace {

SparseMatrix column(const Eigen::VectorXd &v) {
  SparseMatrix s(v.size(), 1);
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0)
      t.emplace_back(i, 0, v(i));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

} // namespace

Expr Expr::constant(const MatrixC &h) {
  Expr e(h.rows());
  e.offset_ = hermitian_coords(h);
  return e;
}

Expr Expr::constant(double v) {
  Expr e(1);
  e.offset_(0) = v;
  return e;
}

Expr Expr::variable(Var v, Index side) {
  Expr e(side);
  SparseMatrix id(side * side, side * side);
  id.setIdentity();
  e.add_term(v.id, id);
  return e;
}

Expr Expr::scaled(Var scalar, const MatrixC &h) {
  Expr e(h.rows());
  e.add_term(scalar.id, column(hermitian_coords(h)));
  return e;
}

Expr Expr::inner(const MatrixC &h, Var x) {
  Expr e(1);
  SparseMatrix row = column(hermitian_coords(h)).transpose();
  e.add_term(x.id, row);
  return e;
}

void Expr::add_term(std::size_t id, const SparseMatrix &coef) {
  auto it = slot_.find(id);
  if (it != slot_.end()) {
    SparseMatrix &m = terms_[it->second].second;
    if (m.cols() != coef.cols())
      throw ProgramError("inconsistent variable size in expression");
    m += coef;
    return;
  }
  slot_.emplace(id, terms_.size());
  terms_.emplace_back(id, coef);
}

Expr &Expr::operator+=(const Expr &o) {
  if (o.k_ != k_)
    throw ProgramError("adding expressions of different dimension");
  for (const auto &[id, m] : o.terms_)
    add_term(id, m);
  offset_ += o.offset_;
  return *this;
}

Expr &Expr::operator-=(const Expr &o) { return *this += -1.0 * o; }

Expr &Expr::operator*=(double s) {
  for (auto &t : terms_)
    t.second *= s;
  offset_ *= s;
  return *this;
}

Expr Expr::mapped(const SparseMatrix &map, Index new_k) const {
  if (map.cols() != k_ * k_ || map.rows() != new_k * new_k)
    throw ProgramError("linear map does not fit expression");
  Expr e(new_k);
  for (const auto &[id, m] : terms_)
    e.add_term(id, (map * m).pruned());
  e.offset_ = map * offset_;
  return e;
}

SparseMatrix superoperator(Index n_in, Index n_out,
                           const std::function<MatrixC(const MatrixC &)> &f) {
  const Index cin = n_in * n_in;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cin);
  for (Index j = 0; j < cin; ++j) {
    e(j) = 1.0;
    MatrixC out = f(from_hermitian_coords(e, n_in));
    if (out.rows() != n_out || out.cols() != n_out)
      throw ProgramError("superoperator output has wrong size");
    Eigen::VectorXd col = hermitian_coords(out);
    for (Index i = 0; i < col.size(); ++i)
      if (std::abs(col(i)) > 1e-14)
        t.emplace_back(i, j, col(i));
    e(j) = 0.0;
  }
  SparseMatrix s(n_out * n_out, cin);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Expr trace(const Expr &e) {
  const Index k = e.dim();
  SparseMatrix row(1, k * k);
  for (Index i = 0; i < k; ++i)
    row.insert(0, diagonal_coord(i)) = 1.0;
  return e.mapped(row, 1);
}

Var Program::add_psd(Index n, std::string name) {
  if (n < 1)
    throw ProgramError("psd variable needs positive size");
  vars_.push_back({std::move(name), VarKind::psd, n});
  return {vars_.size() - 1};
}

Var Program::add_nonneg(std::string name) {
  vars_.push_back({std::move(name), VarKind::nonneg, 1});
  return {vars_.size() - 1};
}

Var Program::add_free(std::string name) {
  vars_.push_back({std::move(name), VarKind::free, 1});
  return {vars_.size() - 1};
}

const VarInfo &Program::info(Var v) const {
  if (v.id >= vars_.size())
    throw ProgramError("undeclared variable");
  return vars_[v.id];
}

Expr Program::operator()(Var v) const {
  return Expr::variable(v, info(v).n);
}

void Program::check(const Expr &e) const {
  for (const auto &[id, m] : e.terms()) {
    if (id >= vars_.size())
      throw ProgramError("expression references undeclared variable");
    if (m.cols() != vars_[id].coords())
      throw ProgramError("expression term has wrong width for variable " +
                         vars_[id].name);
    if (m.rows() != e.dim() * e.dim())
      throw ProgramError("expression term has wrong height");
  }
}

std::size_t Program::add_equality(const Expr &lhs, const MatrixC &rhs) {
  check(lhs);
  if (rhs.rows() != lhs.dim() || rhs.cols() != lhs.dim())
    throw ProgramError("constraint target has wrong size");
  if ((rhs - rhs.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw ProgramError("constraint target is not Hermitian");
  cons_.push_back({lhs, hermitian_coords(rhs)});
  return cons_.size() - 1;
}

std::size_t Program::add_equality(const Expr &lhs, double rhs) {
  if (lhs.dim() != 1)
    throw ProgramError("scalar target for matrix-valued expression");
  MatrixC t(1, 1);
  t(0, 0) = rhs;
  return add_equality(lhs, t);
}

void Program::minimize(const Expr &objective) {
  check(objective);
  if (objective.dim() != 1)
    throw ProgramError("objective must be scalar");
  objective_ = objective;
  maximize_ = false;
}

void Program::maximize(const Expr &objective) {
  minimize(-objective);
  maximize_ = true;
}

const char *to_string(Status s) {
  switch (s) {
  case Status::optimal:
    return "optimal";
  case Status::infeasible:
    return "infeasible";
  case Status::numerical_failure:
    return "numerical-failure";
  }
  return "?";
}

SolverOptions SolverOptions::from_environment() {
  SolverOptions o;
  if (const char *env = std::getenv("CAUSALIS_SOLVER_MAXITER")) {
    char *end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0)
      o.max_iterations = static_cast<int>(v);
  }
  return o;
}

MatrixC SolveReport::matrix(const Program &p, Var v) const {
  const auto &inf = p.info(v);
  if (primal.empty())
    throw ProgramError("no primal solution available");
  if (inf.kind != VarKind::psd) {
    MatrixC m(1, 1);
    m(0, 0) = primal[v.id](0);
    return m;
  }
  return from_hermitian_coords(primal[v.id], inf.n);
}

double SolveReport::value(Var v) const {
  if (primal.empty())
    throw ProgramError("no primal solution available");
  return primal[v.id](0);
}

MatrixC SolveReport::multiplier(const Program &p, std::size_t c) const {
  if (c >= dual.size())
    throw ProgramError("no multiplier for constraint");
  return from_hermitian_coords(dual[c], p.constraints()[c].lhs.dim());
}

MatrixC SolveReport::conic_dual_matrix(const Program &p, Var v) const {
  const auto &inf = p.info(v);
  if (inf.kind != VarKind::psd) {
    MatrixC m(1, 1);
    m(0, 0) = conic_dual[v.id](0);
    return m;
  }
  return from_hermitian_coords(conic_dual[v.id], inf.n);
}

Eigen::MatrixXd real_embedding(const MatrixC &m) {
  const Index n = m.rows();
  Eigen::MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = m.real();
  out.topRightCorner(n, n) = -m.imag();
  out.bottomLeftCorner(n, n) = m.imag();
  out.bottomRightCorner(n, n) = m.real();
  return out;
}

MatrixC complex_from_embedding(const Eigen::MatrixXd &m) {
  const Index n = m.rows() / 2;
  if (m.rows() != 2 * n || m.cols() != 2 * n)
    throw ProgramError("embedding must be 2n x 2n");
  MatrixC out(n, n);
  out.real() = 0.5 * (m.topLeftCorner(n, n) + m.bottomRightCorner(n, n));
  out.imag() = 0.5 * (m.bottomLeftCorner(n, n) - m.topRightCorner(n, n));
  return out;
}

} // namespace causalis::conic
