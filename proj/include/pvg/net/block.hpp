#pragma once

#include <vector>

#include "pvg/act/graphlu.hpp"
#include "pvg/agg/aggregators.hpp"
#include "pvg/graph/local_branch.hpp"
#include "pvg/graph/schedule.hpp"
#include "pvg/graph/similarity.hpp"
#include "pvg/graph/topology.hpp"
#include "pvg/net/config.hpp"

namespace pvg {

// Static description of one trident block.
struct BlockSpec {
  ChannelSplit split;
  Index k = 1;
  Index radius = 3;
  Metric metric = Metric::kCosine;
  AggregatorKind aggregator = AggregatorKind::kMaxE;
  ActivationKind activation = ActivationKind::kGraphLU;
  GraphLUForm graphlu_form = GraphLUForm::kDerived;
  GraphMode graph_mode = GraphMode::kPerGroup;
  Index ffn_ratio = 4;
  bool layer_scale = false;
  Grid grid;

  Index channels() const { return split.local_c + split.first_c + split.second_c; }
  AggregatorSpec group_spec(Index width) const {
    AggregatorSpec spec;
    spec.kind = aggregator;
    spec.in_c = width;
    spec.out_c = width;
    spec.bias = true;
    spec.gin_mlp = true;
    return spec;
  }
};

// Variables a block reads. Members for absent groups stay invalid.
template <typename Scalar>
struct BlockWeights {
  Var<Scalar> norm1_gamma, norm1_beta;
  Var<Scalar> local_alpha, local_position_bias;
  std::vector<Var<Scalar>> first, second;
  Var<Scalar> graph_epsilon;
  Var<Scalar> out_weight, out_bias, layer_scale1;
  Var<Scalar> norm2_gamma, norm2_beta;
  Var<Scalar> fc1_weight, fc1_bias, ffn_epsilon, fc2_weight, fc2_bias, layer_scale2;
};

// Graphs a block built, for diagnostics and export.
struct BlockGraphs {
  GraphTopology first;
  GraphTopology second;
  bool has_second = false;
};

template <typename Scalar>
Var<Scalar> activate(const Var<Scalar>& x, ActivationKind kind, GraphLUForm form, const Var<Scalar>& epsilon) {
  switch (kind) {
    case ActivationKind::kGraphLU: return graphlu(x, epsilon, form);
    case ActivationKind::kGELU: return graphlu(x, Var<Scalar>(Tensor<Scalar>::scalar(Scalar(0))));
    case ActivationKind::kReLU: return max0(x);
  }
  throw ConfigError("unknown activation");
}

template <typename Scalar>
GraphTopology build_graph(const Var<Scalar>& features, const BlockSpec& spec) {
  return topk_neighbors(pairwise_similarity(features.value(), spec.metric), spec.k);
}

// H' = H + f(g(Norm(H))), H'' = H' + FFN(Norm(H')). Channels are laid out as
// [first-order | second-order | local]; each graph group builds its top-k
// graph from its own normalized features and updates through the aggregator,
// the local group runs the Chebyshev-window branch.
template <typename Scalar>
Var<Scalar> pvg_block(const Var<Scalar>& h, const BlockWeights<Scalar>& w, const BlockSpec& spec,
                      BlockGraphs* graphs = nullptr) {
  detail::require_rank(h.shape(), 2, "pvg_block");
  const auto [local_c, first_c, second_c] = spec.split;
  if (h.dim(1) != spec.channels())
    throw DimensionError("pvg_block width " + std::to_string(h.dim(1)) + " does not match schedule " +
                         std::to_string(spec.channels()));
  if (h.dim(0) != spec.grid.nodes()) throw DimensionError("pvg_block node count does not match grid");

  const Var<Scalar> x = layer_norm(h, w.norm1_gamma, w.norm1_beta);
  std::vector<Var<Scalar>> branches;

  GraphTopology shared;
  if (spec.graph_mode == GraphMode::kShared) shared = build_graph(slice(x, 1, 0, first_c + second_c), spec);

  auto graph_group = [&](Index begin, Index width, const std::vector<Var<Scalar>>& weights, GraphTopology* out) {
    const Var<Scalar> part = slice(x, 1, begin, width);
    GraphTopology topo = spec.graph_mode == GraphMode::kShared ? shared : build_graph(part, spec);
    Var<Scalar> y = aggregate_update(spec.group_spec(width), part, topo, weights);
    branches.push_back(activate(y, spec.activation, spec.graphlu_form, w.graph_epsilon));
    if (out) *out = std::move(topo);
  };
  graph_group(0, first_c, w.first, graphs ? &graphs->first : nullptr);
  if (second_c > 0) graph_group(first_c, second_c, w.second, graphs ? &graphs->second : nullptr);
  if (graphs) graphs->has_second = second_c > 0;
  if (local_c > 0)
    branches.push_back(local_branch(slice(x, 1, first_c + second_c, local_c), w.local_alpha,
                                    w.local_position_bias, spec.grid, spec.radius));

  Var<Scalar> y = add_rowwise(matmul(concat(branches, 1), w.out_weight), w.out_bias);
  if (spec.layer_scale) y = mul_rowwise(y, w.layer_scale1);
  const Var<Scalar> h1 = add(h, y);

  Var<Scalar> z = layer_norm(h1, w.norm2_gamma, w.norm2_beta);
  z = add_rowwise(matmul(z, w.fc1_weight), w.fc1_bias);
  z = activate(z, spec.activation, spec.graphlu_form, w.ffn_epsilon);
  z = add_rowwise(matmul(z, w.fc2_weight), w.fc2_bias);
  if (spec.layer_scale) z = mul_rowwise(z, w.layer_scale2);
  return add(h1, z);
}

}  // namespace pvg
