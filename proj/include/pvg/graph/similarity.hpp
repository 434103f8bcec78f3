#pragma once

#include <cmath>
#include <string>

#include "pvg/core/tensor.hpp"

namespace pvg {

enum class Metric { kDot, kCosine, kNegEuclidean };

Metric parse_metric(const std::string& name);
std::string to_string(Metric metric);

// First-order similarity S[i][j] = l(x_i, x_j) for all node pairs of x[n x c].
template <typename Scalar>
Tensor<Scalar> pairwise_similarity(const Tensor<Scalar>& x, Metric metric) {
  if (x.rank() != 2) throw DimensionError("pairwise_similarity expects x[n x c]");
  const Index n = x.rows();
  if (n < 2) throw DimensionError("pairwise_similarity needs at least two nodes");
  const auto xm = x.matrix();
  Tensor<Scalar> s({n, n});
  switch (metric) {
    case Metric::kDot:
      s.matrix().noalias() = xm * xm.transpose();
      break;
    case Metric::kCosine: {
      const Vector<Scalar> norms = xm.rowwise().norm();
      for (Index i = 0; i < n; ++i)
        if (!(norms[i] > Scalar(0)))
          throw DegenerateInputError("zero-norm row " + std::to_string(i) + " under cosine similarity");
      const RowMatrix<Scalar> unit = norms.cwiseInverse().asDiagonal() * xm;
      s.matrix().noalias() = unit * unit.transpose();
      break;
    }
    case Metric::kNegEuclidean: {
      for (Index i = 0; i < n; ++i) {
        s.at(i, i) = Scalar(0);
        for (Index j = i + 1; j < n; ++j) {
          const Scalar d = -(xm.row(i) - xm.row(j)).norm();
          s.at(i, j) = d;
          s.at(j, i) = d;
        }
      }
      break;
    }
  }
  return s;
}

}  // namespace pvg
