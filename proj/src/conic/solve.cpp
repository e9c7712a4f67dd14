#include "causalis/conic.hpp"
#include "core.hpp"
#include "linalg.hpp"

#include <cmath>

namespace causalis::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr Index kDenseLimit = 5000;

// Coordinates: psd variables first, then nonneg scalars (the conic part),
// then free scalars.
struct Layout {
  struct Block {
    std::size_t var;
    Index n;
    Index off;
  };
  std::vector<Block> psd;
  std::vector<std::pair<std::size_t, Index>> nonneg; // (var, conic offset)
  std::vector<std::pair<std::size_t, Index>> free;   // (var, free offset)
  std::vector<Index> offset;                        // per variable
  std::vector<bool> is_free;
  Index nc = 0, nf = 0, lp_off = 0;
};

Layout make_layout(const Program &p) {
  Layout L;
  const auto &vars = p.variables();
  L.offset.assign(vars.size(), 0);
  L.is_free.assign(vars.size(), false);
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (vars[v].kind == VarKind::psd) {
      L.psd.push_back({v, vars[v].n, L.nc});
      L.offset[v] = L.nc;
      L.nc += vars[v].n * vars[v].n;
    }
  L.lp_off = L.nc;
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (vars[v].kind == VarKind::nonneg) {
      L.nonneg.emplace_back(v, L.nc);
      L.offset[v] = L.nc++;
    }
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (vars[v].kind == VarKind::free) {
      L.free.emplace_back(v, L.nf);
      L.offset[v] = L.nf++;
      L.is_free[v] = true;
    }
  return L;
}

struct Assembled {
  SparseMatrix Ac;  // rows x nc
  MatrixXd Af;      // rows x nf
  VectorXd b, cc, cf;
  double c0 = 0;
  std::vector<Index> row_start;
  Index lp_count = 0; // trailing conic coordinates that are nonneg scalars
  std::vector<Index> psd_sides, psd_offsets;
};

Assembled assemble(const Program &p, const Layout &L) {
  Assembled a;
  Index rows = 0;
  for (const auto &c : p.constraints()) {
    a.row_start.push_back(rows);
    rows += c.rhs.size();
  }
  a.row_start.push_back(rows);
  std::vector<Eigen::Triplet<double>> tc;
  a.Af = MatrixXd::Zero(rows, L.nf);
  a.b.resize(rows);
  for (std::size_t ci = 0; ci < p.constraints().size(); ++ci) {
    const auto &c = p.constraints()[ci];
    const Index r0 = a.row_start[ci];
    a.b.segment(r0, c.rhs.size()) = c.rhs - c.lhs.offset();
    for (const auto &[vid, m] : c.lhs.terms()) {
      for (Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
          if (L.is_free[vid])
            a.Af(r0 + it.row(), L.offset[vid]) += it.value();
          else
            tc.emplace_back(r0 + it.row(), L.offset[vid] + it.col(), it.value());
        }
    }
  }
  a.Ac.resize(rows, L.nc);
  a.Ac.setFromTriplets(tc.begin(), tc.end());
  a.cc = VectorXd::Zero(L.nc);
  a.cf = VectorXd::Zero(L.nf);
  if (p.objective()) {
    const auto &o = *p.objective();
    a.c0 = o.offset()(0);
    for (const auto &[vid, m] : o.terms()) {
      MatrixXd d = MatrixXd(m);
      for (Index j = 0; j < d.cols(); ++j) {
        if (L.is_free[vid])
          a.cf(L.offset[vid]) += d(0, j);
        else
          a.cc(L.offset[vid] + j) += d(0, j);
      }
    }
  }
  a.lp_count = static_cast<Index>(L.nonneg.size());
  for (const auto &blk : L.psd) {
    a.psd_sides.push_back(blk.n);
    a.psd_offsets.push_back(blk.off);
  }
  return a;
}

// Coordinates of the identity on the conic part.
VectorXd identity_coords(const Assembled &a) {
  VectorXd iota = VectorXd::Zero(a.Ac.cols());
  for (std::size_t k = 0; k < a.psd_sides.size(); ++k)
    for (Index i = 0; i < a.psd_sides[k]; ++i)
      iota(a.psd_offsets[k] + diagonal_coord(i)) = 1.0;
  for (Index i = 0; i < a.lp_count; ++i)
    iota(a.Ac.cols() - a.lp_count + i) = 1.0;
  return iota;
}

// max lambda s.t. conic part - lambda * identity in the cone, lambda <= 1.
Assembled with_slack(const Assembled &a) {
  Assembled s = a;
  const Index rows = a.Ac.rows(), nc = a.Ac.cols(), nf = a.Af.cols();
  VectorXd iota = identity_coords(a);
  s.Af = MatrixXd::Zero(rows + 1, nf + 1);
  s.Af.topLeftCorner(rows, nf) = a.Af;
  s.Af.block(0, nf, rows, 1) = a.Ac * iota;
  s.Af(rows, nf) = 1.0;
  std::vector<Eigen::Triplet<double>> t;
  for (Index k = 0; k < a.Ac.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a.Ac, k); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  t.emplace_back(rows, nc, 1.0); // cap slack
  s.Ac.resize(rows + 1, nc + 1);
  s.Ac.setFromTriplets(t.begin(), t.end());
  s.b.resize(rows + 1);
  s.b << a.b, 1.0;
  s.cc = VectorXd::Zero(nc + 1);
  s.cf = VectorXd::Zero(nf + 1);
  s.cf(nf) = -1.0;
  s.c0 = 0;
  s.lp_count = a.lp_count + 1;
  s.row_start.back() = rows + 1;
  return s;
}

// --- coordinate <-> core matrix maps ----------------------------------------

MatrixXd core_block(const VectorXd &u, Index n) {
  return real_embedding(from_hermitian_coords(u, n)) * std::sqrt(0.5);
}

VectorXd from_core_block(const MatrixXd &X) {
  return hermitian_coords(complex_from_embedding(X) * std::sqrt(2.0));
}

struct Outcome {
  bool linear_infeasible = false;
  bool unbounded = false;
  bool converged = false;
  VectorXd zc, zf, zdual, u;
  VectorXd ray; // linear inconsistency direction
  int iterations = 0;
  double core_merit = 0;
};

class Reduction {
public:
  Reduction(const Assembled &a, const SolverOptions &opt) : a_(a), opt_(opt) {}

  Outcome run();

private:
  VectorXd P(const VectorXd &y) const {
    return rf_ ? VectorXd(y - Q_ * (Q_.transpose() * y)) : y;
  }
  VectorXd Acp(const VectorXd &x) const { return P(a_.Ac * x); }
  VectorXd AcpT(const VectorXd &y) const {
    return a_.Ac.transpose() * P(y);
  }
  void free_elimination();
  bool rank_reveal();
  VectorXd multipliers_from(const VectorXd &g) const;
  detail::CoreProblem core_problem(bool dual_form) const;
  void coordinates(const VectorXd &z, std::vector<MatrixXd> &blocks,
                   VectorXd &lp) const;
  VectorXd gather(const std::vector<MatrixXd> &blocks, const VectorXd &lp) const;

  const Assembled &a_;
  const SolverOptions &opt_;
  MatrixXd Q_, Afpinv_;
  Index rf_ = 0;
  VectorXd bp_, ccp_, h_;
  double c0p_ = 0;
  bool cols_route_ = true;
  MatrixXd Vr_, V0_, Ur_;
  VectorXd lam_, z0_;
  bool unbounded_ = false;
};

void Reduction::free_elimination() {
  const Index nf = a_.Af.cols();
  bp_ = a_.b;
  ccp_ = a_.cc;
  c0p_ = a_.c0;
  if (nf == 0) {
    h_ = VectorXd::Zero(a_.b.size());
    Afpinv_.resize(0, a_.b.size());
    return;
  }
  Eigen::JacobiSVD<MatrixXd> svd(a_.Af, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd &sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  rf_ = 0;
  while (rf_ < sv.size() && sv(rf_) > tol)
    ++rf_;
  Q_ = svd.matrixU().leftCols(rf_);
  MatrixXd V = svd.matrixV().leftCols(rf_);
  Afpinv_ = V * sv.head(rf_).cwiseInverse().asDiagonal() * Q_.transpose();
  // objective weight on free directions not fixed by any constraint
  VectorXd cf_null = a_.cf - V * (V.transpose() * a_.cf);
  if (cf_null.norm() > 1e-12 * (1 + a_.cf.norm()))
    unbounded_ = true;
  h_ = Afpinv_.transpose() * a_.cf;
  bp_ = P(a_.b);
  ccp_ = a_.cc - a_.Ac.transpose() * h_;
  c0p_ = a_.c0 + h_.dot(a_.b);
}

bool Reduction::rank_reveal() {
  const Index nc = a_.Ac.cols(), rows = a_.Ac.rows();
  cols_route_ = nc <= kDenseLimit || rows > kDenseLimit;
  if (!cols_route_ && rows > kDenseLimit)
    throw ProgramError("program too large for dense reduction");
  MatrixXd G;
  if (cols_route_) {
    G = MatrixXd(SparseMatrix(a_.Ac.transpose() * a_.Ac));
    if (rf_) {
      MatrixXd AQ = a_.Ac.transpose() * Q_;
      G.noalias() -= AQ * AQ.transpose();
    }
  } else {
    G = MatrixXd(SparseMatrix(a_.Ac * a_.Ac.transpose()));
    if (rf_) {
      MatrixXd PG = G - Q_ * (Q_.transpose() * G);
      G = PG - (PG * Q_) * Q_.transpose();
    }
  }
  VectorXd lam;
  MatrixXd vec;
  detail::symmetric_eigen(G, lam, vec);
  const double lmax = lam.size() ? std::max(lam.maxCoeff(), 0.0) : 0.0;
  const double tol = 1e-10 * std::max(lmax, 1e-300);
  std::vector<Index> keep, drop;
  for (Index i = 0; i < lam.size(); ++i)
    (lam(i) > tol ? keep : drop).push_back(i);
  const Index r = keep.size();
  lam_.resize(r);
  MatrixXd R(vec.rows(), r);
  for (Index j = 0; j < r; ++j) {
    lam_(j) = lam(keep[j]);
    R.col(j) = vec.col(keep[j]);
  }
  if (cols_route_) {
    Vr_ = std::move(R);
    V0_.resize(nc, drop.size());
    for (std::size_t j = 0; j < drop.size(); ++j)
      V0_.col(j) = vec.col(drop[j]);
    z0_ = Vr_ * (lam_.cwiseInverse().asDiagonal() * (Vr_.transpose() * AcpT(bp_)));
  } else {
    Ur_ = std::move(R);
    Vr_.resize(nc, r);
    for (Index j = 0; j < r; ++j)
      Vr_.col(j) = AcpT(Ur_.col(j)) / std::sqrt(lam_(j));
    z0_ = AcpT(Ur_ * (lam_.cwiseInverse().asDiagonal() * (Ur_.transpose() * bp_)));
  }
  const VectorXd res = Acp(z0_) - bp_;
  return res.norm() <= 1e-9 * (1 + bp_.norm());
}

VectorXd Reduction::multipliers_from(const VectorXd &g) const {
  VectorXd up;
  if (cols_route_)
    up = Acp(Vr_ * (lam_.cwiseInverse().asDiagonal() * (Vr_.transpose() * g)));
  else
    up = Ur_ * (lam_.cwiseInverse().asDiagonal() * (Ur_.transpose() * Acp(g)));
  return h_ + P(up);
}

void Reduction::coordinates(const VectorXd &z, std::vector<MatrixXd> &blocks,
                            VectorXd &lp) const {
  blocks.clear();
  for (std::size_t k = 0; k < a_.psd_sides.size(); ++k) {
    const Index n = a_.psd_sides[k];
    blocks.push_back(core_block(z.segment(a_.psd_offsets[k], n * n), n));
  }
  lp = z.tail(a_.lp_count);
}

VectorXd Reduction::gather(const std::vector<MatrixXd> &blocks,
                           const VectorXd &lp) const {
  VectorXd z(a_.Ac.cols());
  for (std::size_t k = 0; k < a_.psd_sides.size(); ++k) {
    const Index n = a_.psd_sides[k];
    z.segment(a_.psd_offsets[k], n * n) = from_core_block(blocks[k]);
  }
  z.tail(a_.lp_count) = lp;
  return z;
}

detail::CoreProblem Reduction::core_problem(bool dual_form) const {
  detail::CoreProblem cp;
  const MatrixXd &basis = dual_form ? V0_ : Vr_;
  const Index m = basis.cols();
  const double sign = dual_form ? -1.0 : 1.0;
  for (std::size_t k = 0; k < a_.psd_sides.size(); ++k) {
    const Index n = a_.psd_sides[k], nn = 2 * n;
    cp.sizes.push_back(nn);
    MatrixXd A(nn * nn, m);
    for (Index i = 0; i < m; ++i) {
      MatrixXd blk =
          sign * core_block(basis.col(i).segment(a_.psd_offsets[k], n * n), n);
      A.col(i) = Eigen::Map<VectorXd>(blk.data(), blk.size());
    }
    cp.A.push_back(std::move(A));
  }
  cp.Alp = sign * basis.bottomRows(a_.lp_count);
  VectorXd cvec = dual_form ? z0_ : ccp_;
  std::vector<MatrixXd> Cb;
  VectorXd clp;
  coordinates(cvec, Cb, clp);
  cp.C = std::move(Cb);
  cp.clp = clp;
  cp.b = dual_form ? VectorXd(-(V0_.transpose() * ccp_))
                   : VectorXd(Vr_.transpose() * z0_);
  return cp;
}

Outcome Reduction::run() {
  Outcome out;
  free_elimination();
  if (!rank_reveal()) {
    out.linear_infeasible = true;
    VectorXd e = bp_ - Acp(z0_);
    out.ray = -e / e.norm();
    return out;
  }
  if (unbounded_) {
    out.unbounded = true;
    return out;
  }
  const Index r = Vr_.cols();
  const bool dual_form = cols_route_ && V0_.cols() < r;
  if (cols_route_ && V0_.cols() == 0) {
    // unique point: cone membership is checked by the caller
    out.zc = z0_;
    std::vector<MatrixXd> blocks;
    VectorXd lp;
    coordinates(z0_, blocks, lp);
    // dual: project the negative part to build a candidate certificate
    std::vector<MatrixXd> zb;
    for (auto &b : blocks) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(b);
      VectorXd ev = es.eigenvalues().cwiseMin(0.0);
      zb.push_back(-es.eigenvectors() * ev.asDiagonal() *
                   es.eigenvectors().transpose());
    }
    VectorXd zl = (-lp).cwiseMax(0.0);
    out.zdual = gather(zb, zl);
    out.converged = true;
  } else {
    detail::CoreProblem cp = core_problem(dual_form);
    detail::CoreSolution cs =
        detail::solve_core(cp, opt_.max_iterations, opt_.tolerance);
    out.iterations = cs.iterations;
    out.converged = cs.converged;
    out.core_merit = std::max({cs.pinf, cs.dinf, cs.gap});
    if (dual_form) {
      out.zc = z0_ + V0_ * cs.y;
      out.zdual = gather(cs.X, cs.xlp);
    } else {
      out.zc = gather(cs.X, cs.xlp);
      // exact projection onto the affine equality set
      out.zc -= Vr_ * (Vr_.transpose() * out.zc - Vr_.transpose() * z0_);
      out.zdual = gather(cs.S, cs.slp);
    }
  }
  out.zf = Afpinv_ * (a_.b - a_.Ac * out.zc);
  out.u = multipliers_from(ccp_ - out.zdual);
  return out;
}

// --- checks on the original data --------------------------------------------

double min_cone_eigenvalue(const Assembled &a, const VectorXd &zc) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.psd_sides.size(); ++k) {
    const Index n = a.psd_sides[k];
    m = std::min(m, min_eigenvalue(from_hermitian_coords(
                        zc.segment(a.psd_offsets[k], n * n), n)));
  }
  if (a.lp_count)
    m = std::min(m, zc.tail(a.lp_count).minCoeff());
  return m;
}

SolveReport package(const Program &p, const Layout &L, const Assembled &a,
                    const VectorXd &zc, const VectorXd &zf,
                    const VectorXd &zdual, const VectorXd &u) {
  SolveReport r;
  const auto &vars = p.variables();
  r.primal.resize(vars.size());
  r.conic_dual.resize(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const Index nc = vars[v].coords();
    if (L.is_free[v]) {
      r.primal[v] = zf.segment(L.offset[v], 1);
      r.conic_dual[v] = VectorXd::Zero(1);
    } else {
      r.primal[v] = zc.segment(L.offset[v], nc);
      r.conic_dual[v] = zdual.segment(L.offset[v], nc);
    }
  }
  r.dual.resize(p.constraints().size());
  for (std::size_t c = 0; c < p.constraints().size(); ++c)
    r.dual[c] = u.segment(a.row_start[c], a.row_start[c + 1] - a.row_start[c]);
  return r;
}

void fill_residuals(SolveReport &r, const Assembled &a, const VectorXd &zc,
                    const VectorXd &zf, const VectorXd &zdual,
                    const VectorXd &u) {
  VectorXd res = a.Ac * zc + a.Af * zf - a.b;
  r.residuals.primal_eq =
      res.size() ? res.cwiseAbs().maxCoeff() / (1 + a.b.cwiseAbs().maxCoeff()) : 0;
  VectorXd dc = a.cc - a.Ac.transpose() * u - zdual;
  VectorXd df = a.cf - a.Af.transpose() * u;
  double dmax = 0;
  if (dc.size())
    dmax = dc.cwiseAbs().maxCoeff();
  if (df.size())
    dmax = std::max(dmax, df.cwiseAbs().maxCoeff());
  double cmax = 0;
  if (a.cc.size())
    cmax = a.cc.cwiseAbs().maxCoeff();
  if (a.cf.size())
    cmax = std::max(cmax, a.cf.cwiseAbs().maxCoeff());
  r.residuals.dual_eq = dmax / (1 + cmax);
  const double pobj = a.cc.dot(zc) + a.cf.dot(zf) + a.c0;
  const double dobj = a.b.dot(u) + a.c0;
  r.residuals.gap = std::abs(pobj - dobj) / (1 + std::abs(pobj) + std::abs(dobj));
}

SolveReport infeasible_from_ray(const Program &p, const Layout &L,
                                const Assembled &a, const VectorXd &ray) {
  VectorXd zero_c = VectorXd::Zero(a.Ac.cols()), zero_f = VectorXd::Zero(a.Af.cols());
  SolveReport r = package(p, L, a, zero_c, zero_f, zero_c, ray);
  r.primal.clear();
  r.status = Status::infeasible;
  r.certificate_violation = -a.b.dot(ray);
  return r;
}

SolveReport feasibility(const Program &p, const Layout &L, const Assembled &a,
                        const SolverOptions &opt) {
  Assembled s = with_slack(a);
  Reduction red(s, opt);
  Outcome o = red.run();
  const Index nc = a.Ac.cols(), nf = a.Af.cols();
  if (o.linear_infeasible) {
    VectorXd ray = o.ray.head(a.b.size());
    SolveReport r = infeasible_from_ray(p, L, a, ray);
    r.feasibility_mode = true;
    if (r.certificate_violation < opt.certificate_violation)
      r.status = Status::numerical_failure;
    return r;
  }
  VectorXd zc = o.zc.head(nc);
  VectorXd zf = o.zf.head(nf);
  const double lambda = o.zf(nf);
  VectorXd iota = identity_coords(a);
  zc += lambda * iota;
  VectorXd zdual = o.zdual.head(nc);

  // feasible point?
  const double slack = nc ? min_cone_eigenvalue(a, zc) : 0.0;
  VectorXd res = a.Ac * zc + a.Af * zf - a.b;
  const double eq = res.size() ? res.cwiseAbs().maxCoeff() / (1 + a.b.cwiseAbs().maxCoeff()) : 0.0;
  const bool feasible = slack >= opt.feasible_slack && eq <= 1e-7;

  // certificate: v = -u on the original rows, rescaled so Tr Z = 1
  VectorXd v = -o.u.head(a.b.size());
  VectorXd Z = a.Ac.transpose() * v;
  const double trZ = iota.dot(Z);
  double violation = -std::numeric_limits<double>::infinity();
  bool cert_ok = false;
  if (trZ > 0) {
    v /= trZ;
    Z /= trZ;
    violation = -a.b.dot(v);
    const double free_res = nf ? (a.Af.transpose() * v).cwiseAbs().maxCoeff() : 0.0;
    cert_ok = min_cone_eigenvalue(a, Z) >= -1e-8 && free_res <= 1e-8;
  }
  const bool certified = cert_ok && violation >= opt.certificate_violation;

  SolveReport r;
  if (feasible && !certified) {
    r = package(p, L, a, zc, zf, zdual, o.u.head(a.b.size()));
    r.status = Status::optimal;
    fill_residuals(r, a, zc, zf, zdual, o.u.head(a.b.size()));
  } else if (certified && !feasible) {
    r = package(p, L, a, VectorXd::Zero(nc), VectorXd::Zero(nf), Z, v);
    r.primal.clear();
    r.status = Status::infeasible;
  } else {
    r = package(p, L, a, zc, zf, zdual, o.u.head(a.b.size()));
    r.status = Status::numerical_failure;
  }
  r.feasibility_mode = true;
  r.slack = slack;
  r.certificate_violation = violation;
  r.iterations = o.iterations;
  r.objective_value = 0;
  return r;
}

} // namespace

SolveReport solve(const Program &program, const SolverOptions &options) {
  if (program.variables().empty())
    throw ProgramError("ill-posed program: no variables");
  const Layout L = make_layout(program);
  const Assembled a = assemble(program, L);
  if (!program.objective())
    return feasibility(program, L, a, options);

  Reduction red(a, options);
  Outcome o = red.run();
  if (!o.linear_infeasible && !o.unbounded) {
    SolveReport r = package(program, L, a, o.zc, o.zf, o.zdual, o.u);
    fill_residuals(r, a, o.zc, o.zf, o.zdual, o.u);
    r.iterations = o.iterations;
    double obj = a.cc.dot(o.zc) + a.cf.dot(o.zf) + a.c0;
    r.objective_value = program.maximizing() ? -obj : obj;
    const double cone = L.nc ? min_cone_eigenvalue(a, o.zc) : 0.0;
    const bool ok = o.converged && cone >= -1e-7 && r.residuals.primal_eq <= 1e-7 &&
                    r.residuals.dual_eq <= 1e-7 && r.residuals.gap <= 1e-7;
    if (ok) {
      r.status = Status::optimal;
      return r;
    }
  }
  // classify the failure through the feasibility program
  SolveReport f = feasibility(program, L, a, options);
  if (f.status == Status::infeasible)
    return f;
  f.status = Status::numerical_failure;
  return f;
}

SolveReport solve_lp(const Program &program, const SolverOptions &options) {
  for (const auto &v : program.variables())
    if (v.kind == VarKind::psd)
      throw ProgramError("solve_lp called with a matrix variable");
  return solve(program, options);
}

} // namespace causalis::conic
