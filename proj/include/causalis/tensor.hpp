#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace causalis {

using cplx = std::complex<double>;
using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixC = DenseMatrix<cplx>;

struct LabelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SpaceLabel {
  std::string name;
  Index dim = 1;

  friend bool operator==(const SpaceLabel &, const SpaceLabel &) = default;
};

using LabelSet = std::vector<std::string>;

class TensorSpace {
public:
  TensorSpace() = default;
  TensorSpace(std::initializer_list<SpaceLabel> factors)
      : TensorSpace(std::vector<SpaceLabel>(factors)) {}
  explicit TensorSpace(std::vector<SpaceLabel> factors)
      : factors_(std::move(factors)) {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].dim < 1)
        throw LabelError("dimension of " + factors_[i].name + " must be >= 1");
      for (std::size_t j = 0; j < i; ++j)
        if (factors_[j].name == factors_[i].name)
          throw LabelError("duplicate label " + factors_[i].name);
    }
  }

  const std::vector<SpaceLabel> &factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  const SpaceLabel &operator[](std::size_t i) const { return factors_[i]; }

  Index dim() const {
    Index d = 1;
    for (const auto &f : factors_)
      d *= f.dim;
    return d;
  }

  bool contains(std::string_view name) const {
    return std::any_of(factors_.begin(), factors_.end(),
                       [&](const SpaceLabel &f) { return f.name == name; });
  }

  std::size_t position(std::string_view name) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].name == name)
        return i;
    throw LabelError("unknown label " + std::string(name));
  }

  Index dim_of(std::string_view name) const {
    return factors_[position(name)].dim;
  }

  Index dim_of(const LabelSet &names) const {
    Index d = 1;
    for (const auto &n : names)
      d *= dim_of(n);
    return d;
  }

  LabelSet names() const {
    LabelSet out;
    for (const auto &f : factors_)
      out.push_back(f.name);
    return out;
  }

  TensorSpace without(const LabelSet &names) const {
    for (const auto &n : names)
      position(n);
    std::vector<SpaceLabel> kept;
    for (const auto &f : factors_)
      if (std::find(names.begin(), names.end(), f.name) == names.end())
        kept.push_back(f);
    return TensorSpace(std::move(kept));
  }

  TensorSpace select(const LabelSet &names) const {
    std::vector<SpaceLabel> out;
    for (const auto &n : names)
      out.push_back(factors_[position(n)]);
    return TensorSpace(std::move(out));
  }

  friend TensorSpace concat(const TensorSpace &a, const TensorSpace &b) {
    std::vector<SpaceLabel> all = a.factors_;
    all.insert(all.end(), b.factors_.begin(), b.factors_.end());
    return TensorSpace(std::move(all));
  }

  friend bool operator==(const TensorSpace &, const TensorSpace &) = default;

private:
  std::vector<SpaceLabel> factors_;
};

namespace detail {

// Offsets of every multi-index over `positions` inside the full row-major
// index of `space`, enumerated in the order the positions are listed.
inline std::vector<Index> offsets(const TensorSpace &space,
                                  const std::vector<std::size_t> &positions) {
  const std::size_t n = space.size();
  std::vector<Index> stride(n, 1);
  for (std::size_t k = n; k-- > 1;)
    stride[k - 1] = stride[k] * space[k].dim;
  std::vector<Index> out{0};
  for (std::size_t p : positions) {
    std::vector<Index> next;
    next.reserve(out.size() * space[p].dim);
    for (Index base : out)
      for (Index i = 0; i < space[p].dim; ++i)
        next.push_back(base + i * stride[p]);
    out = std::move(next);
  }
  return out;
}

inline std::vector<std::size_t> positions_of(const TensorSpace &space,
                                             const LabelSet &labels) {
  std::vector<std::size_t> out;
  for (const auto &l : labels) {
    std::size_t p = space.position(l);
    if (std::find(out.begin(), out.end(), p) != out.end())
      throw LabelError("label listed twice: " + l);
    out.push_back(p);
  }
  return out;
}

inline std::vector<std::size_t> complement(const TensorSpace &space,
                                           const std::vector<std::size_t> &p) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (std::find(p.begin(), p.end(), i) == p.end())
      out.push_back(i);
  return out;
}

} // namespace detail

template <typename Scalar> class BasicLabeledOperator {
public:
  using Matrix = DenseMatrix<Scalar>;

  BasicLabeledOperator() = default;
  BasicLabeledOperator(TensorSpace space, Matrix m)
      : space_(std::move(space)), m_(std::move(m)) {
    if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
      throw LabelError("matrix size does not match tensor space");
  }
  template <typename Derived>
  BasicLabeledOperator(TensorSpace space, const Eigen::MatrixBase<Derived> &m)
      : BasicLabeledOperator(std::move(space), Matrix(m)) {}

  static BasicLabeledOperator identity(TensorSpace space) {
    Index d = space.dim();
    return {std::move(space), Matrix::Identity(d, d)};
  }
  static BasicLabeledOperator zero(TensorSpace space) {
    Index d = space.dim();
    return {std::move(space), Matrix::Zero(d, d)};
  }

  const TensorSpace &space() const { return space_; }
  const Matrix &matrix() const { return m_; }
  Matrix &matrix() { return m_; }
  Index dim() const { return m_.rows(); }
  Scalar trace() const { return m_.trace(); }

  BasicLabeledOperator &operator+=(const BasicLabeledOperator &o) {
    require_same(o);
    m_ += o.m_;
    return *this;
  }
  BasicLabeledOperator &operator-=(const BasicLabeledOperator &o) {
    require_same(o);
    m_ -= o.m_;
    return *this;
  }
  BasicLabeledOperator &operator*=(Scalar s) {
    m_ *= s;
    return *this;
  }
  friend BasicLabeledOperator operator+(BasicLabeledOperator a,
                                        const BasicLabeledOperator &b) {
    a += b;
    return a;
  }
  friend BasicLabeledOperator operator-(BasicLabeledOperator a,
                                        const BasicLabeledOperator &b) {
    a -= b;
    return a;
  }
  friend BasicLabeledOperator operator*(Scalar s, BasicLabeledOperator a) {
    a *= s;
    return a;
  }
  friend BasicLabeledOperator operator*(BasicLabeledOperator a, Scalar s) {
    a *= s;
    return a;
  }

  bool is_hermitian(double tol = 1e-12) const {
    return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol;
  }

private:
  void require_same(const BasicLabeledOperator &o) const {
    if (!(o.space_ == space_))
      throw LabelError("operators live on different tensor spaces");
  }

  TensorSpace space_;
  Matrix m_;
};

using LabeledOperator = BasicLabeledOperator<cplx>;

template <typename Scalar>
BasicLabeledOperator<Scalar> tensor(const BasicLabeledOperator<Scalar> &a,
                                    const BasicLabeledOperator<Scalar> &b) {
  for (const auto &f : b.space().factors())
    if (a.space().contains(f.name))
      throw LabelError("duplicate label " + f.name);
  const auto &A = a.matrix();
  const auto &B = b.matrix();
  typename BasicLabeledOperator<Scalar>::Matrix out(A.rows() * B.rows(),
                                                    A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return {concat(a.space(), b.space()), std::move(out)};
}

template <typename Scalar, typename... Rest>
BasicLabeledOperator<Scalar> tensor(const BasicLabeledOperator<Scalar> &a,
                                    const BasicLabeledOperator<Scalar> &b,
                                    const Rest &...rest) {
  return tensor(tensor(a, b), rest...);
}

template <typename Scalar>
BasicLabeledOperator<Scalar> partial_trace(const BasicLabeledOperator<Scalar> &op,
                                           const LabelSet &labels) {
  const auto &space = op.space();
  auto traced = detail::positions_of(space, labels);
  auto kept = detail::complement(space, traced);
  auto ko = detail::offsets(space, kept);
  auto to = detail::offsets(space, traced);
  const auto &M = op.matrix();
  typename BasicLabeledOperator<Scalar>::Matrix out(ko.size(), ko.size());
  for (std::size_t r = 0; r < ko.size(); ++r)
    for (std::size_t c = 0; c < ko.size(); ++c) {
      Scalar s(0);
      for (Index t : to)
        s += M(ko[r] + t, ko[c] + t);
      out(r, c) = s;
    }
  return {space.without(labels), std::move(out)};
}

// Tr_X(op) (x) 1_X / d_X, kept on the same factor order.
template <typename Scalar>
BasicLabeledOperator<Scalar>
trace_and_replace(const BasicLabeledOperator<Scalar> &op,
                  const LabelSet &labels) {
  if (labels.empty())
    return op;
  const auto &space = op.space();
  auto traced = detail::positions_of(space, labels);
  auto kept = detail::complement(space, traced);
  auto ko = detail::offsets(space, kept);
  auto to = detail::offsets(space, traced);
  const auto &M = op.matrix();
  const double inv = 1.0 / static_cast<double>(to.size());
  typename BasicLabeledOperator<Scalar>::Matrix out =
      BasicLabeledOperator<Scalar>::Matrix::Zero(M.rows(), M.cols());
  for (std::size_t r = 0; r < ko.size(); ++r)
    for (std::size_t c = 0; c < ko.size(); ++c) {
      Scalar s(0);
      for (Index t : to)
        s += M(ko[r] + t, ko[c] + t);
      s *= inv;
      for (Index t : to)
        out(ko[r] + t, ko[c] + t) = s;
    }
  return {space, std::move(out)};
}

template <typename Scalar>
BasicLabeledOperator<Scalar>
partial_transpose(const BasicLabeledOperator<Scalar> &op,
                  const LabelSet &labels) {
  const auto &space = op.space();
  auto tp = detail::positions_of(space, labels);
  auto kept = detail::complement(space, tp);
  auto ko = detail::offsets(space, kept);
  auto to = detail::offsets(space, tp);
  const auto &M = op.matrix();
  typename BasicLabeledOperator<Scalar>::Matrix out(M.rows(), M.cols());
  for (Index kr : ko)
    for (Index kc : ko)
      for (Index tr : to)
        for (Index tc : to)
          out(kr + tr, kc + tc) = M(kr + tc, kc + tr);
  return {space, std::move(out)};
}

template <typename Scalar>
BasicLabeledOperator<Scalar> permute_to(const BasicLabeledOperator<Scalar> &op,
                                        const TensorSpace &target) {
  const auto &space = op.space();
  if (target.size() != space.size())
    throw LabelError("target is not a permutation of the operator's factors");
  std::vector<std::size_t> order;
  for (const auto &f : target.factors()) {
    if (!space.contains(f.name) || space.dim_of(f.name) != f.dim)
      throw LabelError("target factor " + f.name + " does not match");
    order.push_back(space.position(f.name));
  }
  // offsets in the source index of each target multi-index
  auto src = detail::offsets(space, order);
  const auto &M = op.matrix();
  typename BasicLabeledOperator<Scalar>::Matrix out(M.rows(), M.cols());
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < src.size(); ++j)
      out(i, j) = M(src[i], src[j]);
  return {target, std::move(out)};
}

// Tr_X[(x^X (x) 1) op]: the factors of x must appear in op's space; the
// result lives on the remaining factors.
template <typename Scalar>
BasicLabeledOperator<Scalar> contract(const BasicLabeledOperator<Scalar> &op,
                                      const BasicLabeledOperator<Scalar> &x) {
  const auto &space = op.space();
  LabelSet labels = x.space().names();
  auto cp = detail::positions_of(space, labels);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (space[cp[i]].dim != x.space()[i].dim)
      throw LabelError("dimension mismatch on " + labels[i]);
  auto kept = detail::complement(space, cp);
  auto ko = detail::offsets(space, kept);
  auto co = detail::offsets(space, cp);
  const auto &M = op.matrix();
  const auto &X = x.matrix();
  typename BasicLabeledOperator<Scalar>::Matrix out =
      BasicLabeledOperator<Scalar>::Matrix::Zero(ko.size(), ko.size());
  const std::size_t dc = co.size();
  for (std::size_t t1 = 0; t1 < dc; ++t1)
    for (std::size_t t2 = 0; t2 < dc; ++t2) {
      const Scalar xv = X(t1, t2);
      if (xv == Scalar(0))
        continue;
      for (std::size_t r = 0; r < ko.size(); ++r)
        for (std::size_t c = 0; c < ko.size(); ++c)
          out(r, c) += xv * M(ko[r] + co[t2], ko[c] + co[t1]);
    }
  return {space.without(labels), std::move(out)};
}

// Tr[(x (x) 1) op] when x covers every factor, i.e. Tr(x op) after reordering.
template <typename Scalar>
Scalar expectation(const BasicLabeledOperator<Scalar> &op,
                   const BasicLabeledOperator<Scalar> &x) {
  auto r = contract(op, x);
  return r.matrix().trace();
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived> &m) {
  return ((m + m.adjoint()) * 0.5).eval();
}

template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived> &m) {
  using Plain = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                              Eigen::Dynamic>;
  Plain h = hermitian_part(m);
  if (h.rows() == 0)
    return 0.0;
  Eigen::SelfAdjointEigenSolver<Plain> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline constexpr double kPsdTol = 1e-10;

template <typename Scalar>
bool is_psd(const BasicLabeledOperator<Scalar> &op, double tol = kPsdTol) {
  return min_eigenvalue(op.matrix()) >= -tol;
}

// Real coordinates of a Hermitian matrix in an orthonormal basis for the
// real inner product Re Tr(A^dagger B): diagonal entries, then sqrt(2) Re and
// sqrt(2) Im of each strictly-upper entry in row-major order.
template <typename Derived>
Eigen::VectorXd hermitian_coords(const Eigen::MatrixBase<Derived> &m) {
  const Index n = m.rows();
  Eigen::VectorXd v(n * n);
  const double r2 = std::sqrt(2.0);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    v(k++) = std::real(m(i, i));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const cplx z = 0.5 * (cplx(m(i, j)) + std::conj(cplx(m(j, i))));
      v(k++) = r2 * z.real();
      v(k++) = r2 * z.imag();
    }
  return v;
}

template <typename Derived>
MatrixC from_hermitian_coords(const Eigen::MatrixBase<Derived> &v, Index n) {
  if (v.size() != n * n)
    throw std::invalid_argument("coordinate vector has wrong length");
  MatrixC m(n, n);
  const double r2 = std::sqrt(0.5);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    m(i, i) = v(k++);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double re = v(k++) * r2;
      const double im = v(k++) * r2;
      m(i, j) = cplx(re, im);
      m(j, i) = cplx(re, -im);
    }
  return m;
}

// Index of the coordinate holding diagonal entry i.
inline Index diagonal_coord(Index i) { return i; }

// --- frequently used operators ---------------------------------------------

inline MatrixC ket_projector(const Eigen::VectorXcd &v) {
  return v * v.adjoint();
}

inline Eigen::VectorXcd basis_ket(Index d, Index i) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
  v(i) = 1.0;
  return v;
}

// Unnormalized sum_i |ii><jj| on two labeled factors of equal dimension.
inline LabeledOperator max_entangled(const SpaceLabel &a, const SpaceLabel &b) {
  if (a.dim != b.dim)
    throw LabelError("maximally entangled operator needs equal dimensions");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(a.dim * b.dim);
  for (Index i = 0; i < a.dim; ++i)
    v(i * b.dim + i) = 1.0;
  return {TensorSpace{a, b}, ket_projector(v)};
}

inline LabeledOperator on(const SpaceLabel &label, MatrixC m) {
  return {TensorSpace{label}, std::move(m)};
}

inline LabeledOperator identity_on(const TensorSpace &space) {
  return LabeledOperator::identity(space);
}

} // namespace causalis
