#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace causalis::conic::detail {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BlockScaling {
  MatrixXd LX, LS;  // Cholesky factors of X and S
  MatrixXd G, GinvT; // W = G G^T, G^T S G = G^{-1} X G^{-T} = diag(d)
  MatrixXd W;
  VectorXd d;
};

bool scale_block(const MatrixXd &X, const MatrixXd &S, BlockScaling &s) {
  Eigen::LLT<MatrixXd> lx(X), ls(S);
  if (lx.info() != Eigen::Success || ls.info() != Eigen::Success)
    return false;
  s.LX = lx.matrixL();
  s.LS = ls.matrixL();
  Eigen::JacobiSVD<MatrixXd> svd(s.LS.transpose() * s.LX,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  s.d = svd.singularValues();
  if (s.d.minCoeff() <= 0)
    return false;
  VectorXd isd = s.d.cwiseSqrt().cwiseInverse();
  s.G = s.LX * svd.matrixV() * isd.asDiagonal();
  s.GinvT = s.LS * svd.matrixU() * isd.asDiagonal();
  s.W.noalias() = s.G * s.G.transpose();
  return true;
}

MatrixXd sym(const MatrixXd &m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with L L^T + alpha dX >= 0.
double max_step(const MatrixXd &L, const MatrixXd &dX) {
  MatrixXd t = L.triangularView<Eigen::Lower>().solve(dX);
  MatrixXd u = L.triangularView<Eigen::Lower>().solve(t.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(u), Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0);
  return lmin >= 0 ? kInf : -1.0 / lmin;
}

double max_step_lp(const VectorXd &x, const VectorXd &dx) {
  double a = kInf;
  for (Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0)
      a = std::min(a, -x(i) / dx(i));
  return a;
}

double inner(const MatrixXd &a, const MatrixXd &b) {
  return (a.array() * b.array()).sum();
}

class Solver {
public:
  Solver(const CoreProblem &p) : p_(p), nb_(p.sizes.size()), m_(p.m()) {}

  CoreSolution run(int max_iterations, double tol);

private:
  MatrixXd adjoint_block(std::size_t k, const VectorXd &y) const {
    const Index n = p_.sizes[k];
    VectorXd v = p_.A[k] * y;
    return Eigen::Map<MatrixXd>(v.data(), n, n);
  }
  VectorXd apply_A(const std::vector<MatrixXd> &X, const VectorXd &x) const {
    VectorXd r = VectorXd::Zero(m_);
    for (std::size_t k = 0; k < nb_; ++k)
      r.noalias() += p_.A[k].transpose() *
                     Eigen::Map<const VectorXd>(X[k].data(), X[k].size());
    if (x.size())
      r.noalias() += p_.Alp.transpose() * x;
    return r;
  }
  void initial_point();
  void residuals();
  bool build_schur();
  VectorXd solve_schur(const VectorXd &rhs) const;
  void direction(const std::vector<MatrixXd> &Rc, const VectorXd &rclp,
                 std::vector<MatrixXd> &dX, VectorXd &dx,
                 std::vector<MatrixXd> &dS, VectorXd &ds, VectorXd &dy) const;

  const CoreProblem &p_;
  std::size_t nb_;
  Index m_;
  Index ntot_ = 0;
  double normb_ = 0, normC_ = 0;

  std::vector<MatrixXd> X_, S_, Rd_;
  VectorXd x_, s_, y_, rp_, rdlp_;
  double pobj_ = 0, dobj_ = 0, mu_ = 0, pinf_ = 0, dinf_ = 0, gap_ = 0;

  std::vector<BlockScaling> sc_;
  VectorXd wlp_; // x / s
  MatrixXd M_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LDLT<MatrixXd> ldlt_;
  bool use_ldlt_ = false;
};

void Solver::initial_point() {
  normb_ = p_.b.norm();
  double c2 = p_.clp.squaredNorm();
  for (const auto &c : p_.C)
    c2 += c.squaredNorm();
  normC_ = std::sqrt(c2);

  X_.resize(nb_);
  S_.resize(nb_);
  ntot_ = p_.Alp.rows();
  for (std::size_t k = 0; k < nb_; ++k) {
    const Index n = p_.sizes[k];
    ntot_ += n;
    double ratio = 0, amax = 0;
    for (Index i = 0; i < m_; ++i) {
      double na = p_.A[k].col(i).norm();
      ratio = std::max(ratio, (1 + std::abs(p_.b(i))) / (1 + na));
      amax = std::max(amax, na);
    }
    const double rn = std::sqrt(double(n));
    double xi = std::max({10.0, rn, n * ratio});
    double eta = std::max({10.0, rn, amax, p_.C[k].norm()});
    X_[k] = xi * MatrixXd::Identity(n, n);
    S_[k] = eta * MatrixXd::Identity(n, n);
  }
  const Index nlp = p_.Alp.rows();
  if (nlp) {
    double ratio = 0, amax = 0;
    for (Index i = 0; i < m_; ++i) {
      double na = p_.Alp.col(i).norm();
      ratio = std::max(ratio, (1 + std::abs(p_.b(i))) / (1 + na));
      amax = std::max(amax, na);
    }
    const double rn = std::sqrt(double(nlp));
    double xi = std::max({10.0, rn, nlp * ratio});
    double eta = std::max({10.0, rn, amax, p_.clp.norm()});
    x_ = VectorXd::Constant(nlp, xi);
    s_ = VectorXd::Constant(nlp, eta);
  } else {
    x_.resize(0);
    s_.resize(0);
  }
  y_ = VectorXd::Zero(m_);
}

void Solver::residuals() {
  rp_ = p_.b - apply_A(X_, x_);
  Rd_.resize(nb_);
  double rd2 = 0, xs = 0;
  pobj_ = 0;
  for (std::size_t k = 0; k < nb_; ++k) {
    Rd_[k] = p_.C[k] - S_[k] - adjoint_block(k, y_);
    rd2 += Rd_[k].squaredNorm();
    pobj_ += inner(p_.C[k], X_[k]);
    xs += inner(X_[k], S_[k]);
  }
  if (x_.size()) {
    rdlp_ = p_.clp - s_ - p_.Alp * y_;
    rd2 += rdlp_.squaredNorm();
    pobj_ += p_.clp.dot(x_);
    xs += x_.dot(s_);
  }
  dobj_ = p_.b.dot(y_);
  mu_ = xs / double(std::max<Index>(ntot_, 1));
  pinf_ = rp_.norm() / (1 + normb_);
  dinf_ = std::sqrt(rd2) / (1 + normC_);
  gap_ = std::max(std::abs(pobj_ - dobj_), xs) /
         (1 + std::abs(pobj_) + std::abs(dobj_));
}

bool Solver::build_schur() {
  sc_.resize(nb_);
  M_ = MatrixXd::Zero(m_, m_);
  for (std::size_t k = 0; k < nb_; ++k) {
    if (!scale_block(X_[k], S_[k], sc_[k]))
      return false;
    // M_ij = <G^T A_i G, G^T A_j G>, accumulated from packed lower triangles
    const Index n = p_.sizes[k];
    const MatrixXd &Gk = sc_[k].G;
    const double r2 = std::sqrt(2.0);
    MatrixXd B(m_, n * (n + 1) / 2);
    MatrixXd tmp(n, n), bi(n, n);
    for (Index i = 0; i < m_; ++i) {
      Eigen::Map<const MatrixXd> Ai(p_.A[k].col(i).data(), n, n);
      tmp.noalias() = Ai * Gk;
      bi.noalias() = Gk.transpose() * tmp;
      Index t = 0;
      for (Index c = 0; c < n; ++c) {
        B(i, t++) = bi(c, c);
        for (Index r = c + 1; r < n; ++r)
          B(i, t++) = r2 * 0.5 * (bi(r, c) + bi(c, r));
      }
    }
    M_.selfadjointView<Eigen::Lower>().rankUpdate(B);
  }
  if (x_.size()) {
    wlp_ = x_.cwiseQuotient(s_);
    M_.noalias() += p_.Alp.transpose() * wlp_.asDiagonal() * p_.Alp;
  }
  M_ = M_.selfadjointView<Eigen::Lower>();
  use_ldlt_ = false;
  llt_.compute(M_);
  if (llt_.info() != Eigen::Success) {
    double shift = 1e-13 * std::max(1.0, M_.diagonal().cwiseAbs().maxCoeff());
    MatrixXd Mr = M_;
    Mr.diagonal().array() += shift;
    llt_.compute(Mr);
    if (llt_.info() != Eigen::Success) {
      ldlt_.compute(Mr);
      use_ldlt_ = true;
      if (ldlt_.info() != Eigen::Success)
        return false;
    }
  }
  return true;
}

VectorXd Solver::solve_schur(const VectorXd &rhs) const {
  VectorXd x = use_ldlt_ ? VectorXd(ldlt_.solve(rhs)) : VectorXd(llt_.solve(rhs));
  // one step of iterative refinement
  VectorXd r = rhs - M_ * x;
  x += use_ldlt_ ? VectorXd(ldlt_.solve(r)) : VectorXd(llt_.solve(r));
  return x;
}

void Solver::direction(const std::vector<MatrixXd> &Rc, const VectorXd &rclp,
                       std::vector<MatrixXd> &dX, VectorXd &dx,
                       std::vector<MatrixXd> &dS, VectorXd &ds,
                       VectorXd &dy) const {
  VectorXd rhs = rp_;
  std::vector<MatrixXd> T(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    const MatrixXd &W = sc_[k].W;
    T[k] = Rc[k] - W * Rd_[k] * W;
    rhs.noalias() -= p_.A[k].transpose() *
                     Eigen::Map<const VectorXd>(T[k].data(), T[k].size());
  }
  if (x_.size())
    rhs.noalias() -= p_.Alp.transpose() * (rclp - wlp_.cwiseProduct(rdlp_));
  dy = solve_schur(rhs);
  dX.resize(nb_);
  dS.resize(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    const MatrixXd &W = sc_[k].W;
    dS[k] = sym(Rd_[k] - adjoint_block(k, dy));
    dX[k] = sym(Rc[k] - W * dS[k] * W);
  }
  if (x_.size()) {
    ds = rdlp_ - p_.Alp * dy;
    dx = rclp - wlp_.cwiseProduct(ds);
  }
}

CoreSolution Solver::run(int max_iterations, double tol) {
  initial_point();
  CoreSolution best;
  double best_merit = kInf;
  auto snapshot = [&](int it, bool conv) {
    best.X = X_;
    best.S = S_;
    best.xlp = x_;
    best.slp = s_;
    best.y = y_;
    best.pobj = pobj_;
    best.dobj = dobj_;
    best.pinf = pinf_;
    best.dinf = dinf_;
    best.gap = gap_;
    best.iterations = it;
    best.converged = conv;
  };

  const double scale0 = [&] {
    double s = x_.size() ? x_.cwiseAbs().maxCoeff() : 0.0;
    for (const auto &X : X_)
      s = std::max(s, X.cwiseAbs().maxCoeff());
    return s;
  }();
  double stall = 0;

  for (int it = 0;; ++it) {
    residuals();
    const double merit = std::max({pinf_, dinf_, gap_});
    if (merit < best_merit) {
      best_merit = merit;
      snapshot(it, merit <= tol);
    }
    if (merit <= tol || it >= max_iterations)
      break;
    // diverging iterates signal infeasibility; leave it to the caller
    double xmax = x_.size() ? x_.cwiseAbs().maxCoeff() : 0.0;
    for (const auto &X : X_)
      xmax = std::max(xmax, X.cwiseAbs().maxCoeff());
    if (xmax > 1e12 * std::max(1.0, scale0) || y_.norm() > 1e14)
      break;
    if (!build_schur())
      break;

    // predictor
    std::vector<MatrixXd> Rc(nb_), dX, dS;
    VectorXd rclp, dx, ds, dy;
    for (std::size_t k = 0; k < nb_; ++k)
      Rc[k] = -X_[k];
    if (x_.size())
      rclp = -x_;
    direction(Rc, rclp, dX, dx, dS, ds, dy);

    auto steps = [&](double &ap, double &ad) {
      ap = kInf;
      ad = kInf;
      for (std::size_t k = 0; k < nb_; ++k) {
        ap = std::min(ap, max_step(sc_[k].LX, dX[k]));
        ad = std::min(ad, max_step(sc_[k].LS, dS[k]));
      }
      if (x_.size()) {
        ap = std::min(ap, max_step_lp(x_, dx));
        ad = std::min(ad, max_step_lp(s_, ds));
      }
    };
    double ap, ad;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);

    double xs_aff = 0;
    for (std::size_t k = 0; k < nb_; ++k)
      xs_aff += inner(X_[k] + ap * dX[k], S_[k] + ad * dS[k]);
    if (x_.size())
      xs_aff += (x_ + ap * dx).dot(s_ + ad * ds);
    const double mu_aff = xs_aff / double(ntot_);
    double sigma = std::pow(std::clamp(mu_aff / mu_, 0.0, 1.0), 3);
    const double gamma = 0.9 + 0.09 * std::min(ap, ad);

    // corrector in the scaled space where X and S are both diag(d)
    for (std::size_t k = 0; k < nb_; ++k) {
      const auto &s = sc_[k];
      MatrixXd dXt = s.GinvT.transpose() * dX[k] * s.GinvT;
      MatrixXd dSt = s.G.transpose() * dS[k] * s.G;
      MatrixXd R = -sym(dXt * dSt);
      R.diagonal().array() += sigma * mu_;
      R.diagonal() -= s.d.cwiseProduct(s.d);
      const Index n = R.rows();
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          R(i, j) *= 2.0 / (s.d(i) + s.d(j));
      Rc[k] = sym(s.G * R * s.G.transpose());
    }
    if (x_.size()) {
      VectorXd g = wlp_.cwiseSqrt();
      VectorXd v = x_.cwiseProduct(s_).cwiseSqrt();
      VectorXd dxt = dx.cwiseQuotient(g), dst = ds.cwiseProduct(g);
      VectorXd R = (sigma * mu_ - v.array().square() - dxt.array() * dst.array())
                       .matrix();
      rclp = g.cwiseProduct(R.cwiseQuotient(v));
    }
    direction(Rc, rclp, dX, dx, dS, ds, dy);
    steps(ap, ad);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    if (ap < 1e-10 && ad < 1e-10) {
      if (++stall > 3)
        break;
    } else {
      stall = 0;
    }
    for (std::size_t k = 0; k < nb_; ++k) {
      X_[k] = sym(X_[k] + ap * dX[k]);
      S_[k] = sym(S_[k] + ad * dS[k]);
    }
    if (x_.size()) {
      x_ += ap * dx;
      s_ += ad * ds;
    }
    y_ += ad * dy;
  }
  return best;
}

} // namespace

CoreSolution solve_core(const CoreProblem &p, int max_iterations, double tol) {
  Solver s(p);
  return s.run(max_iterations, tol);
}

} // namespace causalis::conic::detail
