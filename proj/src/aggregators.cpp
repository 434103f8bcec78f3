#include <algorithm>
#include <cmath>
#include <numeric>

#include "pvg/agg/aggregators.hpp"
#include "pvg/agg/decomposition.hpp"

namespace pvg {

AggregatorKind parse_aggregator(const std::string& name) {
  if (name == "maxe") return AggregatorKind::kMaxE;
  if (name == "mrconv") return AggregatorKind::kMRGraphConv;
  if (name == "edgeconv") return AggregatorKind::kEdgeConv;
  if (name == "sage") return AggregatorKind::kGraphSAGE;
  if (name == "gin") return AggregatorKind::kGIN;
  throw ConfigError("unknown aggregator '" + name + "'");
}

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kMaxE: return "maxe";
    case AggregatorKind::kMRGraphConv: return "mrconv";
    case AggregatorKind::kEdgeConv: return "edgeconv";
    case AggregatorKind::kGraphSAGE: return "sage";
    case AggregatorKind::kGIN: return "gin";
  }
  return "?";
}

Index AggregatorSpec::transform_in() const {
  switch (kind) {
    case AggregatorKind::kMaxE: return 3 * in_c;
    case AggregatorKind::kMRGraphConv:
    case AggregatorKind::kEdgeConv:
    case AggregatorKind::kGraphSAGE: return 2 * in_c;
    case AggregatorKind::kGIN: return in_c;
  }
  return 0;
}

std::vector<ParamShape> aggregator_param_shapes(const AggregatorSpec& spec) {
  if (spec.in_c <= 0 || spec.out_c <= 0) throw ConfigError("aggregator widths must be positive");
  std::vector<ParamShape> shapes;
  auto linear = [&](const std::string& name, Index in, Index out) {
    shapes.push_back({name + ".weight", {in, out}});
    if (spec.bias) shapes.push_back({name + ".bias", {out}});
  };
  const Index c = spec.in_c, o = spec.out_c;
  switch (spec.kind) {
    case AggregatorKind::kMaxE:
      linear("update", 3 * c, o);
      break;
    case AggregatorKind::kMRGraphConv:
      linear("update", 2 * c, o);
      break;
    case AggregatorKind::kEdgeConv:
      linear("edge_mlp.0", 2 * c, 2 * c);
      linear("edge_mlp.1", 2 * c, o);
      break;
    case AggregatorKind::kGraphSAGE:
      linear("neighbor", c, c);
      linear("update", 2 * c, o);
      break;
    case AggregatorKind::kGIN:
      linear("mlp.0", c, o);
      if (spec.gin_mlp) linear("mlp.1", o, o);
      break;
  }
  return shapes;
}

Index param_count(const AggregatorSpec& spec) {
  const Index c = spec.in_c, o = spec.out_c, b = spec.bias ? 1 : 0;
  switch (spec.kind) {
    case AggregatorKind::kMaxE: return 3 * c * o + b * o;
    case AggregatorKind::kMRGraphConv: return 2 * c * o + b * o;
    case AggregatorKind::kEdgeConv: return 4 * c * c + 2 * c * o + b * (2 * c + o);
    case AggregatorKind::kGraphSAGE: return c * c + 2 * c * o + b * (c + o);
    case AggregatorKind::kGIN: return c * o + b * o + (spec.gin_mlp ? o * o + b * o : 0);
  }
  return 0;
}

double param_ratio_vs_gin(const AggregatorSpec& spec) {
  AggregatorSpec unit = spec;
  unit.kind = AggregatorKind::kGIN;
  unit.gin_mlp = false;
  return static_cast<double>(param_count(spec)) / static_cast<double>(param_count(unit));
}

DecompositionLevel decompose_max(std::span<const double> z) {
  if (z.empty()) throw EmptyReductionError("decomposition of an empty vector");
  DecompositionLevel level;
  level.max = *std::max_element(z.begin(), z.end());
  level.mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  // argmax_j (z' - z_j); the first such element on ties.
  std::size_t sel = 0;
  for (std::size_t j = 1; j < z.size(); ++j)
    if (level.max - z[j] > level.max - z[sel]) sel = j;
  level.selected = z[sel];
  level.bound = level.max - z[sel];
  level.remainder = level.selected - level.mean;
  level.identity_residual = std::abs(level.mean + level.remainder + level.bound - level.max);
  return level;
}

DecompositionResult decomposition_check(std::span<const double> z, int depth) {
  if (depth < 1) throw ConfigError("decomposition depth must be >= 1");
  DecompositionResult result;
  std::vector<double> current(z.begin(), z.end());
  double partial = 0.0;
  for (int t = 0; t < depth; ++t) {
    const DecompositionLevel level = decompose_max(current);
    partial += level.mean + level.remainder;
    result.levels.push_back(level);
    for (double& v : current) v = level.max - v;
  }
  result.telescoped = partial + result.levels.back().bound;
  result.recursion_residual = std::abs(result.telescoped - result.levels.front().max);
  return result;
}

}  // namespace pvg
