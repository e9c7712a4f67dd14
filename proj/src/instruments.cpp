#include "causalis/instruments.hpp"

namespace causalis {

InstrumentSet::InstrumentSet(SpaceLabel in, SpaceLabel out,
                             const std::vector<std::vector<MatrixC>> &mats)
    : input(std::move(in)), output(std::move(out)) {
  TensorSpace sp{input, output};
  for (const auto &row : mats) {
    if (!elements.empty() && row.size() != elements[0].size())
      throw std::invalid_argument("ragged instrument element table");
    std::vector<LabeledOperator> r;
    for (const auto &m : row)
      r.emplace_back(sp, m);
    elements.push_back(std::move(r));
  }
}

InstrumentSet InstrumentSet::relabeled(const std::string &in,
                                       const std::string &out) const {
  InstrumentSet s;
  s.input = {in, input.dim};
  s.output = {out, output.dim};
  TensorSpace sp{s.input, s.output};
  for (const auto &row : elements) {
    std::vector<LabeledOperator> r;
    for (const auto &e : row)
      r.emplace_back(sp, e.matrix());
    s.elements.push_back(std::move(r));
  }
  return s;
}

POVMSet::POVMSet(SpaceLabel s, const std::vector<std::vector<MatrixC>> &mats)
    : space(std::move(s)) {
  for (const auto &row : mats) {
    if (!elements.empty() && row.size() != elements[0].size())
      throw std::invalid_argument("ragged POVM element table");
    std::vector<LabeledOperator> r;
    for (const auto &m : row)
      r.emplace_back(TensorSpace{space}, m);
    elements.push_back(std::move(r));
  }
}

POVMSet POVMSet::relabeled(const std::string &name) const {
  POVMSet s;
  s.space = {name, space.dim};
  for (const auto &row : elements) {
    std::vector<LabeledOperator> r;
    for (const auto &e : row)
      r.emplace_back(TensorSpace{s.space}, e.matrix());
    s.elements.push_back(std::move(r));
  }
  return s;
}

ResidualReport validate_instruments(const InstrumentSet &set) {
  ResidualReport r;
  r.min_eigenvalue = 0;
  bool first = true;
  const TensorSpace sp = set.space();
  for (Index x = 0; x < set.settings(); ++x) {
    LabeledOperator sum = LabeledOperator::zero(sp);
    for (Index a = 0; a < set.outcomes(); ++a) {
      const auto &e = set(x, a);
      if (!(e.space() == sp))
        throw LabelError("instrument element on the wrong space");
      const double m = min_eigenvalue(e.matrix());
      r.min_eigenvalue = first ? m : std::min(r.min_eigenvalue, m);
      first = false;
      r.items.push_back({"hermitian " + std::to_string(x) + "," + std::to_string(a),
                         (e.matrix() - e.matrix().adjoint()).norm()});
      sum += e;
    }
    MatrixC tp = partial_trace(sum, {set.output.name}).matrix();
    tp -= MatrixC::Identity(set.input.dim, set.input.dim);
    r.items.push_back({"trace preserving " + std::to_string(x), tp.norm()});
  }
  r.passed = r.worst() <= kResidualTol && r.min_eigenvalue >= -kPsdTol;
  return r;
}

ResidualReport validate_instruments(const POVMSet &set) {
  ResidualReport r;
  bool first = true;
  const Index d = set.space.dim;
  for (Index z = 0; z < set.settings(); ++z) {
    MatrixC sum = MatrixC::Zero(d, d);
    for (Index c = 0; c < set.outcomes(); ++c) {
      const auto &e = set(z, c);
      if (!(e.space() == TensorSpace{set.space}))
        throw LabelError("POVM element on the wrong space");
      const double m = min_eigenvalue(e.matrix());
      r.min_eigenvalue = first ? m : std::min(r.min_eigenvalue, m);
      first = false;
      r.items.push_back({"hermitian " + std::to_string(z) + "," + std::to_string(c),
                         (e.matrix() - e.matrix().adjoint()).norm()});
      sum += e.matrix();
    }
    r.items.push_back({"normalization " + std::to_string(z),
                       (sum - MatrixC::Identity(d, d)).norm()});
  }
  r.passed = r.worst() <= kResidualTol && r.min_eigenvalue >= -kPsdTol;
  return r;
}

namespace {

Eigen::VectorXcd plus() {
  Eigen::VectorXcd v(2);
  v << 1, 1;
  return v / std::sqrt(2.0);
}

Eigen::VectorXcd minus() {
  Eigen::VectorXcd v(2);
  v << 1, -1;
  return v / std::sqrt(2.0);
}

MatrixC pp(const Eigen::VectorXcd &a, const Eigen::VectorXcd &b) {
  Eigen::VectorXcd v(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i)
    v.segment(i * b.size(), b.size()) = a(i) * b;
  return ket_projector(v);
}

} // namespace

SwitchInstruments switch_instruments() {
  const auto z0 = basis_ket(2, 0), z1 = basis_ket(2, 1);
  std::vector<std::vector<MatrixC>> m = {{pp(z0, z0), pp(z1, z1)},
                                         {pp(plus(), plus()), pp(minus(), minus())}};
  return {InstrumentSet({"AI", 2}, {"AO", 2}, m),
          InstrumentSet({"BI", 2}, {"BO", 2}, m),
          POVMSet({"CIc", 2}, {{ket_projector(plus()), ket_projector(minus())}})};
}

InstrumentSet unitary_instrument(const MatrixC &u, const std::string &in,
                                 const std::string &out) {
  const Index d = u.rows();
  if (u.cols() != d || (u.adjoint() * u - MatrixC::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("matrix is not unitary");
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(d * d);
  for (Index i = 0; i < d; ++i)
    phi.segment(i * d, d) = u.col(i);
  return InstrumentSet({in, d}, {out, d}, {{ket_projector(phi)}});
}

namespace {

std::vector<Eigen::VectorXcd> spanning_states(Index d) {
  std::vector<Eigen::VectorXcd> s;
  for (Index j = 0; j < d; ++j)
    s.push_back(basis_ket(d, j));
  for (Index j = 0; j < d; ++j)
    for (Index k = j + 1; k < d; ++k) {
      s.push_back((basis_ket(d, j) + basis_ket(d, k)) / std::sqrt(2.0));
      s.push_back((basis_ket(d, j) + cplx(0, 1) * basis_ket(d, k)) / std::sqrt(2.0));
    }
  return s;
}

MatrixC inverse_sqrt(const MatrixC &m) {
  Eigen::SelfAdjointEigenSolver<MatrixC> es(hermitian_part(m));
  Eigen::VectorXd v = es.eigenvalues();
  for (Index i = 0; i < v.size(); ++i)
    v(i) = v(i) > 1e-10 ? 1.0 / std::sqrt(v(i)) : 0.0;
  return es.eigenvectors() * v.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

InstrumentSet tomographic_instruments(Index d_in, Index d_out,
                                      const std::string &in,
                                      const std::string &out) {
  if (d_in < 2 || d_out < 2)
    throw std::invalid_argument("tomographic instruments need dimensions >= 2");
  auto probes = spanning_states(d_in);
  MatrixC frame = MatrixC::Zero(d_in, d_in);
  for (const auto &v : probes)
    frame += ket_projector(v);
  const MatrixC t = inverse_sqrt(frame);
  std::vector<MatrixC> effects;
  for (const auto &v : probes)
    effects.push_back(t * ket_projector(v) * t);
  std::vector<std::vector<MatrixC>> m;
  for (const auto &prep : spanning_states(d_out)) {
    const MatrixC sigma = ket_projector(prep);
    std::vector<MatrixC> row;
    for (const auto &e : effects)
      row.push_back(tensor(LabeledOperator(TensorSpace{{in, d_in}}, MatrixC(e.transpose())),
                           LabeledOperator(TensorSpace{{out, d_out}}, sigma))
                        .matrix());
    m.push_back(std::move(row));
  }
  return InstrumentSet({in, d_in}, {out, d_out}, m);
}

Index spanning_rank(const InstrumentSet &set) {
  std::vector<Eigen::VectorXd> cols;
  for (const auto &row : set.elements)
    for (const auto &e : row)
      cols.push_back(hermitian_coords(e.matrix()));
  if (cols.empty())
    return 0;
  Eigen::MatrixXd m(cols[0].size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    m.col(j) = cols[j];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

MatrixC random_unitary(Index d, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  MatrixC z(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      z(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<MatrixC> qr(z);
  MatrixC q = qr.householderQ();
  MatrixC r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    const cplx ph = r(j, j) / std::abs(r(j, j));
    q.col(j) *= ph;
  }
  return q;
}

InstrumentSet random_instrument(Index d_in, Index d_out, Index settings,
                                Index outcomes, std::mt19937_64 &rng,
                                const std::string &in, const std::string &out) {
  std::normal_distribution<double> g;
  const Index n = d_in * d_out;
  TensorSpace sp{{in, d_in}, {out, d_out}};
  std::vector<std::vector<MatrixC>> all;
  for (Index x = 0; x < settings; ++x) {
    std::vector<MatrixC> els;
    MatrixC sum = MatrixC::Zero(d_in, d_in);
    for (Index a = 0; a < outcomes; ++a) {
      MatrixC z(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          z(i, j) = cplx(g(rng), g(rng));
      els.push_back(z * z.adjoint());
      sum += partial_trace(LabeledOperator(sp, els.back()), {out}).matrix();
    }
    const MatrixC t = tensor(LabeledOperator(TensorSpace{{in, d_in}}, inverse_sqrt(sum)),
                             LabeledOperator::identity(TensorSpace{{out, d_out}}))
                          .matrix();
    for (auto &e : els)
      e = hermitian_part(MatrixC(t * e * t));
    all.push_back(std::move(els));
  }
  return InstrumentSet({in, d_in}, {out, d_out}, all);
}

POVMSet random_povm(Index d, Index settings, Index outcomes,
                    std::mt19937_64 &rng, const std::string &name) {
  InstrumentSet s = random_instrument(d, 1, settings, outcomes, rng, name, "_");
  std::vector<std::vector<MatrixC>> m;
  for (const auto &row : s.elements) {
    std::vector<MatrixC> r;
    for (const auto &e : row)
      r.push_back(e.matrix());
    m.push_back(std::move(r));
  }
  return POVMSet({name, d}, m);
}

InstrumentSet coarse_grain(const InstrumentSet &set,
                           const std::vector<Index> &groups) {
  if (static_cast<Index>(groups.size()) != set.outcomes())
    throw std::invalid_argument("one group per outcome required");
  const Index k = groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
  InstrumentSet out;
  out.input = set.input;
  out.output = set.output;
  for (const auto &row : set.elements) {
    std::vector<LabeledOperator> r(k, LabeledOperator::zero(set.space()));
    for (std::size_t a = 0; a < row.size(); ++a)
      r[groups[a]] += row[a];
    out.elements.push_back(std::move(r));
  }
  return out;
}

} // namespace causalis
