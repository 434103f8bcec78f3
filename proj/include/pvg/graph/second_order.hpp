#pragma once

#include <utility>
#include <vector>

#include "pvg/core/tensor.hpp"
#include "pvg/graph/grid.hpp"
#include "pvg/graph/local_branch.hpp"

namespace pvg {

// Local neighborhood of every node with a per-channel aggregation weight for
// each member: phi(N(v_i)) = sum_t w_it * x_t.
template <typename Scalar>
struct Neighborhoods {
  Index channels = 0;
  std::vector<std::vector<std::pair<Index, Vector<Scalar>>>> rows;

  // Members sharing one scalar weight on every channel.
  static Neighborhoods uniform(const std::vector<std::vector<Index>>& members, Index channels, Scalar weight) {
    Neighborhoods nb;
    nb.channels = channels;
    for (const auto& row : members) {
      auto& out = nb.rows.emplace_back();
      for (Index t : row) out.emplace_back(t, Vector<Scalar>::Constant(channels, weight));
    }
    return nb;
  }
};

// The neighborhoods a local branch aggregates over: the Chebyshev window of
// each node with that offset's weights.
template <typename Scalar>
Neighborhoods<Scalar> neighborhoods_from_local_branch(const Tensor<Scalar>& offset_weights, const Grid& grid,
                                                      Index radius) {
  Neighborhoods<Scalar> nb;
  nb.channels = offset_weights.dim(1);
  nb.rows.resize(static_cast<std::size_t>(grid.nodes()));
  for (const auto& e : window_edges(grid, radius))
    nb.rows[static_cast<std::size_t>(e.target)].emplace_back(
        e.source, offset_weights.matrix().row(e.slot).transpose());
  return nb;
}

// S2[i][j] = sum_l (sum_t a_it x_t^l) * (sum_t a_jt x_t^l), evaluated in that
// literal per-channel form.
template <typename Scalar>
Tensor<Scalar> second_order_similarity(const Tensor<Scalar>& x, const Neighborhoods<Scalar>& nb) {
  if (x.rank() != 2) throw DimensionError("second_order_similarity expects x[n x c]");
  const Index n = x.rows(), c = x.cols();
  if (static_cast<Index>(nb.rows.size()) != n || nb.channels != c)
    throw DimensionError("neighborhoods do not match x");
  std::vector<std::vector<Scalar>> phi(static_cast<std::size_t>(n), std::vector<Scalar>(static_cast<std::size_t>(c)));
  for (Index i = 0; i < n; ++i) {
    const auto& row = nb.rows[static_cast<std::size_t>(i)];
    if (row.empty()) throw DegenerateInputError("node " + std::to_string(i) + " has an empty neighborhood");
    for (const auto& [t, w] : row) {
      if (t < 0 || t >= n) throw DimensionError("neighborhood member out of range");
      for (Index l = 0; l < c; ++l) phi[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] += w[l] * x.at(t, l);
    }
  }
  Tensor<Scalar> s({n, n});
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Scalar acc = 0;
      for (Index l = 0; l < c; ++l)
        acc += phi[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] * phi[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
      s.at(i, j) = acc;
    }
  return s;
}

}  // namespace pvg
