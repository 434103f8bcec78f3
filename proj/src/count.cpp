#include "pvg/net/count.hpp"

#include "pvg/graph/local_branch.hpp"

namespace pvg {

namespace {

// Mult-adds of one aggregator over n nodes with k neighbors (bias adds not
// counted).
std::int64_t aggregator_mult_adds(const AggregatorSpec& spec, Index n, Index k) {
  const Index c = spec.in_c, o = spec.out_c;
  switch (spec.kind) {
    case AggregatorKind::kMaxE: return n * 3 * c * o;
    case AggregatorKind::kMRGraphConv: return n * 2 * c * o;
    case AggregatorKind::kEdgeConv: return n * k * (4 * c * c + 2 * c * o);
    case AggregatorKind::kGraphSAGE: return n * k * c * c + n * 2 * c * o;
    case AggregatorKind::kGIN: return n * (c * o + (spec.gin_mlp ? o * o : 0));
  }
  return 0;
}

std::int64_t aggregator_weights(const AggregatorSpec& spec) {
  AggregatorSpec no_bias = spec;
  no_bias.bias = false;
  return param_count(no_bias);
}

}  // namespace

ModelCost count_params_flops(const ModelConfig& config) {
  config.validate();
  ModelCost cost;
  const Index p = config.patch_size;
  const bool graphlu = config.activation == ActivationKind::kGraphLU;
  const Index total_blocks = config.total_blocks();
  const Index window = window_size(config.radius);

  auto linear = [&](Index n, Index in, Index out, bool bias) {
    cost.params += in * out + (bias ? out : 0);
    cost.linear_weights += in * out;
    cost.mult_adds += n * in * out;
  };

  auto [gh, gw] = config.stage_grid(0);
  linear(gh * gw, p * p * ModelConfig::kChannels, config.stage_widths[0], true);
  if (graphlu && config.share_epsilon) cost.params += 1;

  Index global = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    const Index c = config.stage_widths[s];
    if (s > 0) {
      const auto [ph, pw] = config.stage_grid(s - 1);
      linear((ph / 2) * (pw / 2), 4 * config.stage_widths[s - 1], c, true);
    }
    const auto [h, w] = config.stage_grid(s);
    const Index n = h * w;
    const Index k = std::min(config.k[s], n - 1);
    if (config.stage_depths[s] == 0) continue;
    const ChannelSchedule schedule = config.stage_schedule(s);
    for (const ChannelSplit& split : schedule.per_block) {
      const bool layer_scale = global >= total_blocks - config.layer_scale_blocks;
      ++global;
      cost.params += 2 * c + 2 * c;  // two norms
      for (Index width : {split.first_c, split.second_c}) {
        if (width == 0) continue;
        AggregatorSpec spec{config.aggregator, width, width, true, true, 0.0};
        cost.params += param_count(spec);
        cost.linear_weights += aggregator_weights(spec);
        cost.mult_adds += aggregator_mult_adds(spec, n, k);
      }
      if (config.graph_mode == GraphMode::kShared)
        cost.mult_adds += n * n * (split.first_c + split.second_c);
      else
        cost.mult_adds += n * n * split.first_c + n * n * split.second_c;
      if (split.local_c > 0) {
        cost.params += 2 * window * split.local_c;
        cost.mult_adds += n * window * split.local_c;
      }
      if (graphlu && !config.share_epsilon) cost.params += 2;
      linear(n, c, c, true);
      linear(n, c, config.ffn_ratio * c, true);
      linear(n, config.ffn_ratio * c, c, true);
      if (layer_scale) cost.params += 2 * c;
    }
  }
  linear(1, config.stage_widths[kStages - 1], config.num_classes, true);
  return cost;
}

}  // namespace pvg
