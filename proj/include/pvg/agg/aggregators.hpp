#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pvg/core/ops.hpp"
#include "pvg/graph/topology.hpp"

namespace pvg {

enum class AggregatorKind { kMaxE, kMRGraphConv, kEdgeConv, kGraphSAGE, kGIN };

AggregatorKind parse_aggregator(const std::string& name);
std::string to_string(AggregatorKind kind);

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::kMaxE;
  Index in_c = 0;
  Index out_c = 0;
  bool bias = false;
  // GIN: false is the single linear transform used as the parameter unit,
  // true the two-layer MLP (hidden width out_c).
  bool gin_mlp = false;
  double gin_eps = 0.0;

  // Width of the concatenated input the main transform sees.
  Index transform_in() const;
};

struct ParamShape {
  std::string name;
  Shape shape;
};

// Learnable tensors of an aggregator in the order `baseline_update` expects.
std::vector<ParamShape> aggregator_param_shapes(const AggregatorSpec& spec);

// Closed-form parameter count, independent of the shape list above.
Index param_count(const AggregatorSpec& spec);

// Parameter count relative to a single-linear GIN at the same widths and bias
// setting.
double param_ratio_vs_gin(const AggregatorSpec& spec);

namespace detail {

inline void require_rows(const GraphTopology& topo, Index n) {
  if (topo.n_nodes != n) throw DimensionError("topology node count does not match features");
  if (topo.k < 1) throw DegenerateInputError("every node needs at least one neighbor");
}

}  // namespace detail

// [n x k x c] neighbor features x_j in topology order.
template <typename Scalar>
Var<Scalar> gather_neighbors(const Var<Scalar>& x, const GraphTopology& topo) {
  detail::require_rank(x.shape(), 2, "gather_neighbors");
  const Index n = x.dim(0), c = x.dim(1), k = topo.k;
  detail::require_rows(topo, n);
  std::vector<Index> index(static_cast<std::size_t>(n * k * c));
  std::size_t p = 0;
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < k; ++r)
      for (Index ch = 0; ch < c; ++ch) index[p++] = topo.neighbor(i, r) * c + ch;
  return gather(x, std::move(index), {n, k, c});
}

// [n x k x c] with x_i repeated k times.
template <typename Scalar>
Var<Scalar> repeat_self(const Var<Scalar>& x, Index k) {
  const Index n = x.dim(0), c = x.dim(1);
  std::vector<Index> index(static_cast<std::size_t>(n * k * c));
  std::size_t p = 0;
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < k; ++r)
      for (Index ch = 0; ch < c; ++ch) index[p++] = i * c + ch;
  return gather(x, std::move(index), {n, k, c});
}

// Channel-wise max over neighbors of (x_j - x_i): [n x c].
template <typename Scalar>
Var<Scalar> max_relative(const Var<Scalar>& x, const GraphTopology& topo) {
  return reduce(sub(gather_neighbors(x, topo), repeat_self(x, topo.k)), 1, ReduceMode::kMax);
}

// Concat[x_i, max_j(x_j - x_i), mean_j(x_j)] per node: [n x 3c].
template <typename Scalar>
Var<Scalar> maxe_aggregate(const Var<Scalar>& x, const GraphTopology& topo) {
  const Var<Scalar> neighbors = gather_neighbors(x, topo);
  const Var<Scalar> rel = reduce(sub(neighbors, repeat_self(x, topo.k)), 1, ReduceMode::kMax);
  const Var<Scalar> mean = reduce(neighbors, 1, ReduceMode::kMean);
  return concat<Scalar>({x, rel, mean}, 1);
}

template <typename Scalar>
Var<Scalar> maxe_update(const Var<Scalar>& aggregate, const Var<Scalar>& weight) {
  return matmul(aggregate, weight);
}

template <typename Scalar>
Var<Scalar> mr_aggregate(const Var<Scalar>& x, const GraphTopology& topo) {
  return concat<Scalar>({x, max_relative(x, topo)}, 1);
}

namespace detail {
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const std::vector<Var<Scalar>>& w, std::size_t& at, bool bias) {
  Var<Scalar> y = matmul(x, w.at(at++));
  if (bias) y = add_rowwise(y, w.at(at++));
  return y;
}
}  // namespace detail

// Aggregate-and-update for any kind. `weights` follows
// aggregator_param_shapes(spec). Hidden nonlinearities of the baseline MLPs
// are max0.
template <typename Scalar>
Var<Scalar> aggregate_update(const AggregatorSpec& spec, const Var<Scalar>& x, const GraphTopology& topo,
                             const std::vector<Var<Scalar>>& weights) {
  detail::require_rank(x.shape(), 2, "aggregate_update");
  if (x.dim(1) != spec.in_c) throw DimensionError("aggregator input width mismatch");
  const Index n = x.dim(0), c = spec.in_c, k = topo.k;
  std::size_t at = 0;
  switch (spec.kind) {
    case AggregatorKind::kMaxE:
      return detail::linear(maxe_aggregate(x, topo), weights, at, spec.bias);
    case AggregatorKind::kMRGraphConv:
      return detail::linear(mr_aggregate(x, topo), weights, at, spec.bias);
    case AggregatorKind::kEdgeConv: {
      const Var<Scalar> self = repeat_self(x, k);
      const Var<Scalar> edge = concat<Scalar>({self, sub(gather_neighbors(x, topo), self)}, 2);
      Var<Scalar> h = reshape(edge, {n * k, 2 * c});
      h = max0(detail::linear(h, weights, at, spec.bias));
      h = detail::linear(h, weights, at, spec.bias);
      return reduce(reshape(h, {n, k, spec.out_c}), 1, ReduceMode::kMax);
    }
    case AggregatorKind::kGraphSAGE: {
      Var<Scalar> nb = reshape(gather_neighbors(x, topo), {n * k, c});
      nb = max0(detail::linear(nb, weights, at, spec.bias));
      const Var<Scalar> mean = reduce(reshape(nb, {n, k, c}), 1, ReduceMode::kMean);
      return detail::linear(concat<Scalar>({x, mean}, 1), weights, at, spec.bias);
    }
    case AggregatorKind::kGIN: {
      const Var<Scalar> summed = reduce(gather_neighbors(x, topo), 1, ReduceMode::kSum);
      Var<Scalar> h = add(scale(x, static_cast<Scalar>(1.0 + spec.gin_eps)), summed);
      h = detail::linear(h, weights, at, spec.bias);
      if (spec.gin_mlp) h = detail::linear(max0(h), weights, at, spec.bias);
      return h;
    }
  }
  throw ConfigError("unknown aggregator kind");
}

}  // namespace pvg
