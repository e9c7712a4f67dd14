#pragma once

#include "causalis/tensor.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

namespace causalis::detail {

inline Index product(const std::vector<Index> &v) {
  return std::accumulate(v.begin(), v.end(), Index(1), std::multiplies<>());
}

inline std::vector<Index> digits(Index k, const std::vector<Index> &radices) {
  std::vector<Index> out(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    out[i] = k % radices[i];
    k /= radices[i];
  }
  return out;
}

inline Index undigits(const std::vector<Index> &d, const std::vector<Index> &radices) {
  if (d.size() != radices.size())
    throw std::out_of_range("index has the wrong arity");
  Index k = 0;
  for (std::size_t i = 0; i < radices.size(); ++i) {
    if (d[i] < 0 || d[i] >= radices[i])
      throw std::out_of_range("index out of range");
    k = k * radices[i] + d[i];
  }
  return k;
}

inline Index ipow(Index b, Index e) {
  Index r = 1;
  while (e-- > 0)
    r *= b;
  return r;
}

inline MatrixC kron(const MatrixC &a, const MatrixC &b) {
  MatrixC out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline MatrixC diag_projector(Index d, Index i) {
  MatrixC m = MatrixC::Zero(d, d);
  m(i, i) = 1.0;
  return m;
}

// Choi of the channel keeping the first min(dims) basis states of `from` and
// sending the rest to |0>; an isometric embedding when from is smaller.
inline LabeledOperator embedding_choi(const SpaceLabel &from, const SpaceLabel &to) {
  const Index n = from.dim, h = to.dim;
  MatrixC j = MatrixC::Zero(n * h, n * h);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k) {
      if (i < h && k < h)
        j(i * h + i, k * h + k) = 1.0;
      else if (i == k)
        j(i * h, i * h) += 1.0;
    }
  return {TensorSpace{from, to}, j};
}

// m padded with zeros to a d x d matrix
inline MatrixC padded(const MatrixC &m, Index d) {
  MatrixC out = MatrixC::Zero(d, d);
  out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

} // namespace causalis::detail
