#pragma once

#include <cstdlib>
#include <vector>

#include "pvg/core/ops.hpp"
#include "pvg/graph/grid.hpp"

namespace pvg {

inline Index window_size(Index radius) { return (2 * radius + 1) * (2 * radius + 1); }

// Row of (dy, dx) in the offset weight table.
inline Index offset_slot(Index dy, Index dx, Index radius) {
  return (dy + radius) * (2 * radius + 1) + (dx + radius);
}

inline Index chebyshev_distance(const std::array<Index, 2>& a, const std::array<Index, 2>& b) {
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

// mask[i][j] = 1 iff the row-major cells i and j are within Chebyshev
// distance r of each other.
template <typename Scalar = double>
Tensor<Scalar> chebyshev_mask(Index height, Index width, Index radius) {
  const Grid grid = Grid::row_major(height, width);
  const Index n = grid.nodes();
  Tensor<Scalar> mask({n, n});
  for (Index i = 0; i < n; ++i) {
    const auto [ri, ci] = grid.coord(i);
    for (Index dy = -radius; dy <= radius; ++dy)
      for (Index dx = -radius; dx <= radius; ++dx) {
        const Index j = grid.node_at(ri + dy, ci + dx);
        if (j >= 0) mask.at(i, j) = Scalar(1);
      }
  }
  return mask;
}

// Per-offset, per-channel weights of the local branch plus the learnable
// positional bias that replaces an explicit position embedding.
template <typename Scalar>
struct LocalBranchParams {
  Index radius = 3;
  Tensor<Scalar> offset_weights;  // [(2r+1)^2 x c]
  Tensor<Scalar> position_bias;   // [(2r+1)^2 x c]; empty means none

  static LocalBranchParams zeros(Index radius, Index channels) {
    LocalBranchParams p;
    p.radius = radius;
    p.offset_weights = Tensor<Scalar>({window_size(radius), channels});
    return p;
  }
};

// (target, slot, source) triples of every in-grid window offset.
struct WindowEdge {
  Index target;
  Index slot;
  Index source;
};

inline std::vector<WindowEdge> window_edges(const Grid& grid, Index radius) {
  std::vector<WindowEdge> edges;
  edges.reserve(static_cast<std::size_t>(grid.nodes() * window_size(radius)));
  for (Index i = 0; i < grid.nodes(); ++i) {
    const auto [ri, ci] = grid.coord(i);
    for (Index dy = -radius; dy <= radius; ++dy)
      for (Index dx = -radius; dx <= radius; ++dx) {
        const Index j = grid.node_at(ri + dy, ci + dx);
        if (j >= 0) edges.push_back({i, offset_slot(dy, dx, radius), j});
      }
  }
  return edges;
}

// y_i = sum over in-grid j with cheb(i, j) <= r of alpha[offset(i, j)] * x_j,
// channel-wise, plus the sum of position_bias over the same in-grid offsets.
// Out-of-grid offsets contribute nothing (zero padding).
template <typename Scalar>
Var<Scalar> local_branch(const Var<Scalar>& x, const Var<Scalar>& offset_weights,
                         const Var<Scalar>& position_bias, const Grid& grid, Index radius) {
  detail::require_rank(x.shape(), 2, "local_branch");
  const Index n = x.dim(0), c = x.dim(1);
  if (n != grid.nodes())
    throw DimensionError("local_branch: " + std::to_string(n) + " nodes on a " +
                         std::to_string(grid.height()) + "x" + std::to_string(grid.width()) + " grid");
  const Shape table{window_size(radius), c};
  if (offset_weights.shape() != table) throw DimensionError("local_branch offset weight table has wrong shape");
  const bool has_bias = position_bias.valid();
  if (has_bias && position_bias.shape() != table)
    throw DimensionError("local_branch position bias table has wrong shape");

  auto edges = window_edges(grid, radius);
  const auto xm = x.value().matrix();
  const auto am = offset_weights.value().matrix();
  Tensor<Scalar> out({n, c});
  auto ym = out.matrix();
  for (const auto& e : edges) {
    ym.row(e.target).array() += am.row(e.slot).array() * xm.row(e.source).array();
    if (has_bias) ym.row(e.target) += position_bias.value().matrix().row(e.slot);
  }
  std::vector<Var<Scalar>> parents{x, offset_weights};
  if (has_bias) parents.push_back(position_bias);
  return make_result<Scalar>(
      std::move(out), parents,
      [x, offset_weights, position_bias, has_bias, edges = std::move(edges), n, c,
       slots = table[0]](Node<Scalar>& self) {
        const auto g = self.grad.matrix();
        const auto xm = x.value().matrix();
        const auto am = offset_weights.value().matrix();
        RowMatrix<Scalar> gx = RowMatrix<Scalar>::Zero(n, c);
        RowMatrix<Scalar> ga = RowMatrix<Scalar>::Zero(slots, c);
        RowMatrix<Scalar> gb = RowMatrix<Scalar>::Zero(slots, c);
        for (const auto& e : edges) {
          gx.row(e.source).array() += am.row(e.slot).array() * g.row(e.target).array();
          ga.row(e.slot).array() += g.row(e.target).array() * xm.row(e.source).array();
          gb.row(e.slot) += g.row(e.target);
        }
        accumulate(*x.node(), gx);
        accumulate(*offset_weights.node(), ga);
        if (has_bias) accumulate(*position_bias.node(), gb);
      },
      "local_branch");
}

template <typename Scalar>
Var<Scalar> local_branch(const Var<Scalar>& x, const LocalBranchParams<Scalar>& params, const Grid& grid) {
  Var<Scalar> bias;
  if (!params.position_bias.empty()) bias = Var<Scalar>(params.position_bias);
  return local_branch(x, Var<Scalar>(params.offset_weights), bias, grid, params.radius);
}

}  // namespace pvg
