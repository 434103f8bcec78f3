#pragma once

// Gradient-check cases for every differentiable operation, shared by the unit
// tests and the acceptance binary.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pvg/act/graphlu.hpp"
#include "pvg/agg/aggregators.hpp"
#include "pvg/core/grad_check.hpp"
#include "pvg/graph/local_branch.hpp"
#include "pvg/graph/similarity.hpp"
#include "pvg/graph/topology.hpp"
#include "pvg/net/pvg_net.hpp"
#include "test_util.hpp"

namespace pvg::test {

using Fn = std::function<Var<double>(const Var<double>&)>;

struct GradCase {
  std::string name;
  Fn f;
  Tensor<double> x;
};

inline GradCheckReport run_case(const GradCase& c, const GradCheckOptions& opts = {}) {
  return grad_check(c.name, c.f, c.x, opts);
}

inline std::vector<GradCase> op_cases(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  auto rt = [&](Shape s) { return random_tensor(std::move(s), rng); };
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, Fn f, Tensor<double> x) {
    cases.push_back({std::move(name), std::move(f), std::move(x)});
  };
  std::uint64_t proj = 100;
  auto p = [&proj]() { return ++proj; };

  {
    const auto b = rt({4, 5});
    const auto a = rt({3, 4});
    add_case("matmul/a", [b, s = p()](const Var<double>& x) { return project(matmul(x, Var<double>(b)), s); }, rt({3, 4}));
    add_case("matmul/b", [a, s = p()](const Var<double>& x) { return project(matmul(Var<double>(a), x), s); }, rt({4, 5}));
  }
  {
    const auto o = rt({3, 4});
    add_case("add", [o, s = p()](const Var<double>& x) { return project(add(x, Var<double>(o)), s); }, rt({3, 4}));
    add_case("sub/lhs", [o, s = p()](const Var<double>& x) { return project(sub(x, Var<double>(o)), s); }, rt({3, 4}));
    add_case("sub/rhs", [o, s = p()](const Var<double>& x) { return project(sub(Var<double>(o), x), s); }, rt({3, 4}));
    add_case("mul", [o, s = p()](const Var<double>& x) { return project(mul(x, Var<double>(o)), s); }, rt({3, 4}));
    add_case("mul/self", [s = p()](const Var<double>& x) { return project(mul(x, x), s); }, rt({3, 4}));
    add_case("scale", [s = p()](const Var<double>& x) { return project(scale(x, -1.7), s); }, rt({3, 4}));
    add_case("scale_by/tensor",
             [s = p()](const Var<double>& x) { return project(scale_by(x, Var<double>(Tensor<double>::scalar(0.6))), s); },
             rt({3, 4}));
    add_case("scale_by/scalar", [o, s = p()](const Var<double>& x) { return project(scale_by(Var<double>(o), x), s); },
             rt({1}));
  }
  add_case("erf", [s = p()](const Var<double>& x) { return project(erf(x), s); },
           random_tensor({4, 6}, rng, -2.5, 2.5));
  add_case("max0", [s = p()](const Var<double>& x) { return project(max0(x), s); },
           random_signed_away_from_zero({4, 6}, rng));
  for (auto [mode, mname] : {std::pair{ReduceMode::kMax, "max"}, std::pair{ReduceMode::kMean, "mean"},
                             std::pair{ReduceMode::kSum, "sum"}})
    for (Index axis = 0; axis < 3; ++axis)
      add_case("reduce/" + std::string(mname) + "/axis" + std::to_string(axis),
               [mode, axis, s = p()](const Var<double>& x) { return project(reduce(x, axis, mode), s); },
               rt({3, 4, 5}));
  add_case("reshape", [s = p()](const Var<double>& x) { return project(reshape(x, {6, 2}), s); }, rt({3, 4}));
  add_case("sum", [s = p()](const Var<double>& x) { return scale(sum(x), 0.5); }, rt({3, 4}));
  {
    const auto o = rt({3, 2, 2});
    add_case("concat/axis1",
             [o, s = p()](const Var<double>& x) { return project(concat<double>({Var<double>(o), x, x}, 1), s); },
             rt({3, 3, 2}));
    add_case("concat/axis2",
             [s = p()](const Var<double>& x) { return project(concat<double>({x, scale(x, 2.0)}, 2), s); },
             rt({3, 3, 2}));
  }
  add_case("slice", [s = p()](const Var<double>& x) { return project(slice(x, 1, 1, 3), s); }, rt({3, 5, 2}));
  add_case("split",
           [s = p()](const Var<double>& x) {
             const std::vector<Index> sizes{1, 3, 1};
             const auto parts = split(x, 1, std::span<const Index>(sizes));
             return add(project(parts[0], s), project(mul(parts[1], parts[1]), s + 1));
           },
           rt({3, 5}));
  add_case("gather",
           [s = p()](const Var<double>& x) {
             return project(gather(x, {0, 5, 5, -1, 11, 2, 3, 3}, {2, 4}), s);
           },
           rt({3, 4}));
  {
    const auto v = rt({4});
    const auto m = rt({3, 4});
    add_case("add_rowwise/x", [v, s = p()](const Var<double>& x) { return project(add_rowwise(x, Var<double>(v)), s); }, rt({3, 4}));
    add_case("add_rowwise/bias", [m, s = p()](const Var<double>& x) { return project(add_rowwise(Var<double>(m), x), s); }, rt({4}));
    add_case("mul_rowwise/x", [v, s = p()](const Var<double>& x) { return project(mul_rowwise(x, Var<double>(v)), s); }, rt({3, 4}));
    add_case("mul_rowwise/scale", [m, s = p()](const Var<double>& x) { return project(mul_rowwise(Var<double>(m), x), s); }, rt({4}));
  }
  {
    const auto m = rt({4, 6});
    const auto g = random_tensor({6}, rng, 0.5, 1.5);
    const auto b = rt({6});
    add_case("layer_norm/x",
             [g, b, s = p()](const Var<double>& x) { return project(layer_norm(x, Var<double>(g), Var<double>(b)), s); },
             rt({4, 6}));
    add_case("layer_norm/gamma",
             [m, b, s = p()](const Var<double>& x) { return project(layer_norm(Var<double>(m), x, Var<double>(b)), s); },
             rt({6}));
    add_case("layer_norm/beta",
             [m, g, s = p()](const Var<double>& x) { return project(layer_norm(Var<double>(m), Var<double>(g), x), s); },
             rt({6}));
  }
  add_case("softmax_cross_entropy",
           [](const Var<double>& x) { return softmax_cross_entropy(x, {2, 0, 1}); }, random_tensor({3, 4}, rng, -2, 2));
  for (auto form : {GraphLUForm::kDerived, GraphLUForm::kPrinted}) {
    const std::string fname = to_string(form);
    const auto xs = random_tensor({4, 5}, rng, -3, 3);
    add_case("graphlu/" + fname + "/x",
             [form, s = p()](const Var<double>& x) {
               return project(graphlu(x, Var<double>(Tensor<double>::scalar(0.3)), form), s);
             },
             xs);
    add_case("graphlu/" + fname + "/epsilon",
             [form, xs, s = p()](const Var<double>& e) { return project(graphlu(Var<double>(xs), e, form), s); },
             Tensor<double>::scalar(0.2));
    add_case("graphlu/" + fname + "/epsilon_negative",
             [form, xs, s = p()](const Var<double>& e) { return project(graphlu(Var<double>(xs), e, form), s); },
             Tensor<double>::scalar(-0.5));
  }
  {
    const Index radius = 1, c = 3;
    const Grid grid = Grid::row_major(4, 5);
    const auto xs = rt({20, c});
    const auto alpha = rt({window_size(radius), c});
    const auto beta = rt({window_size(radius), c});
    add_case("local_branch/x",
             [=, s = p()](const Var<double>& x) {
               return project(local_branch(x, Var<double>(alpha), Var<double>(beta), grid, radius), s);
             },
             xs);
    add_case("local_branch/alpha",
             [=, s = p()](const Var<double>& a) {
               return project(local_branch(Var<double>(xs), a, Var<double>(beta), grid, radius), s);
             },
             alpha);
    add_case("local_branch/position_bias",
             [=, s = p()](const Var<double>& b) {
               return project(local_branch(Var<double>(xs), Var<double>(alpha), b, grid, radius), s);
             },
             beta);
  }
  {
    const Index n = 7, c = 4;
    const auto xs = rt({n, c});
    const GraphTopology topo = topk_neighbors(pairwise_similarity(xs, Metric::kCosine), 3);
    add_case("gather_neighbors", [=, s = p()](const Var<double>& x) { return project(gather_neighbors(x, topo), s); }, xs);
    add_case("repeat_self", [=, s = p()](const Var<double>& x) { return project(repeat_self(x, 3), s); }, xs);
    add_case("max_relative", [=, s = p()](const Var<double>& x) { return project(max_relative(x, topo), s); }, xs);
    add_case("maxe_aggregate", [=, s = p()](const Var<double>& x) { return project(maxe_aggregate(x, topo), s); }, xs);
    add_case("mr_aggregate", [=, s = p()](const Var<double>& x) { return project(mr_aggregate(x, topo), s); }, xs);
    const auto w = rt({3 * c, 5});
    add_case("maxe_update/agg", [=, s = p()](const Var<double>& a) { return project(maxe_update(a, Var<double>(w)), s); },
             rt({n, 3 * c}));
    for (auto kind : {AggregatorKind::kMaxE, AggregatorKind::kMRGraphConv, AggregatorKind::kEdgeConv,
                      AggregatorKind::kGraphSAGE, AggregatorKind::kGIN}) {
      AggregatorSpec spec;
      spec.kind = kind;
      spec.in_c = c;
      spec.out_c = 5;
      spec.bias = true;
      spec.gin_mlp = true;
      spec.gin_eps = 0.25;
      std::vector<Tensor<double>> weights;
      for (const auto& ps : aggregator_param_shapes(spec)) weights.push_back(rt(ps.shape));
      const std::string kname = "aggregate_update/" + to_string(kind);
      add_case(kname + "/x",
               [=, s = p()](const Var<double>& x) {
                 std::vector<Var<double>> wv(weights.begin(), weights.end());
                 return project(aggregate_update(spec, x, topo, wv), s);
               },
               xs);
      for (std::size_t i = 0; i < weights.size(); ++i)
        add_case(kname + "/" + aggregator_param_shapes(spec)[i].name,
                 [=, s = p()](const Var<double>& wi) {
                   std::vector<Var<double>> wv(weights.begin(), weights.end());
                   wv[i] = wi;
                   return project(aggregate_update(spec, Var<double>(xs), topo, wv), s);
                 },
                 weights[i]);
    }
  }
  {
    const Index patch = 2;
    const auto w = rt({patch * patch * 3, 6});
    const auto b = rt({6});
    add_case("node_embedding/image",
             [=, s = p()](const Var<double>& x) { return project(node_embedding(x, Var<double>(w), Var<double>(b), patch), s); },
             random_tensor({4, 6, 3}, rng, 0, 1));
    const auto img = random_tensor({4, 6, 3}, rng, 0, 1);
    add_case("node_embedding/weight",
             [=, s = p()](const Var<double>& x) { return project(node_embedding(Var<double>(img), x, Var<double>(b), patch), s); },
             w);
    const auto dw = rt({4 * 3, 5});
    const auto db = rt({5});
    add_case("downsample/h",
             [=, s = p()](const Var<double>& x) { return project(downsample(x, 4, 6, Var<double>(dw), Var<double>(db)), s); },
             rt({24, 3}));
    const auto dh = rt({24, 3});
    add_case("downsample/weight",
             [=, s = p()](const Var<double>& x) { return project(downsample(Var<double>(dh), 4, 6, x, Var<double>(db)), s); },
             dw);
  }
  return cases;
}

// Small single-stage configuration whose first block has all three channel
// groups, a local window and LayerScale.
inline ModelConfig small_block_config() {
  ModelConfig c;
  c.stage_depths = {0, 3, 0, 0};
  c.stage_widths = {32, 32, 32, 32};
  c.k = {4, 4, 4, 4};
  c.radius = 1;
  c.start_ratio = {0.5, 0.5, 0.5, 0.5};
  c.end_ratio = {0.75, 0.75, 0.75, 0.75};
  c.granularity = 8;
  c.image_height = 16;
  c.image_width = 16;
  c.patch_size = 2;
  c.num_classes = 3;
  c.layer_scale_blocks = 1;
  return c;
}

// LayerScale and epsilons away from their initial values, so branch
// gradients are not swamped by the residual path.
inline void perturb_for_grad_check(PvgNet<double>& net) {
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const auto& name = net.params().name(i);
    if (name.find("layer_scale") != std::string::npos) net.params()[i].data().setConstant(0.5);
    if (name.find("epsilon") != std::string::npos) net.params()[i].data().setConstant(0.2);
  }
}

// Gradient cases for one block of `net`: the block input plus every tensor the
// block reads.
inline std::vector<GradCase> block_cases(const PvgNet<double>& net, std::size_t block, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const BlockSlots& slots = net.blocks()[block];
  const Index n = slots.spec.grid.nodes(), c = slots.spec.channels();
  const Tensor<double> h0 = random_tensor({n, c}, rng);
  const auto base = net.params().bind(false);
  std::vector<GradCase> cases;
  cases.push_back({"pvg_block/input",
                   [&net, slots, base, s = seed + 1](const Var<double>& h) {
                     return project(pvg_block(h, net.block_weights(slots, base), slots.spec), s);
                   },
                   h0});
  std::vector<std::ptrdiff_t> used{slots.norm1_gamma, slots.norm1_beta, slots.local_alpha, slots.local_position_bias,
                                   slots.graph_epsilon, slots.out_weight, slots.out_bias, slots.layer_scale1,
                                   slots.norm2_gamma, slots.norm2_beta, slots.fc1_weight, slots.fc1_bias,
                                   slots.ffn_epsilon, slots.fc2_weight, slots.fc2_bias, slots.layer_scale2};
  used.insert(used.end(), slots.first.begin(), slots.first.end());
  used.insert(used.end(), slots.second.begin(), slots.second.end());
  for (std::ptrdiff_t slot : used) {
    if (slot < 0) continue;
    const auto i = static_cast<std::size_t>(slot);
    cases.push_back({"pvg_block/" + net.params().name(i),
                     [&net, slots, base, h0, i, s = seed + 1](const Var<double>& w) {
                       auto vars = base;
                       vars[i] = w;
                       return project(pvg_block(Var<double>(h0), net.block_weights(slots, vars), slots.spec), s);
                     },
                     net.params()[i]});
  }
  return cases;
}

// Gradient cases for the whole forward pass: the image plus every parameter
// tensor. The objective is a fixed random projection of the logits.
inline std::vector<GradCase> network_cases(const PvgNet<double>& net, const Tensor<double>& image, std::uint64_t seed,
                                           const std::string& prefix = "forward") {
  const auto base = net.params().bind(false);
  std::vector<GradCase> cases;
  cases.push_back({prefix + "/image",
                   [&net, base, s = seed](const Var<double>& x) { return project(net.forward(x, base), s); }, image});
  for (std::size_t i = 0; i < net.params().size(); ++i)
    cases.push_back({prefix + "/" + net.params().name(i),
                     [&net, base, image, i, s = seed](const Var<double>& w) {
                       auto vars = base;
                       vars[i] = w;
                       return project(net.forward(Var<double>(image), vars), s);
                     },
                     net.params()[i]});
  return cases;
}

}  // namespace pvg::test
