#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pvg/net/block.hpp"
#include "pvg/net/config.hpp"
#include "pvg/net/params.hpp"

namespace pvg {

// Non-overlapping p x p patches of image[h x w x 3], each flattened as
// (dy, dx, channel) and projected: [(h/p)(w/p) x C].
template <typename Scalar>
Var<Scalar> node_embedding(const Var<Scalar>& image, const Var<Scalar>& weight, const Var<Scalar>& bias,
                           Index patch) {
  const Shape& s = image.shape();
  if (s.size() != 3 || s[2] != ModelConfig::kChannels) throw DimensionError("image must be [h x w x 3]");
  const Index h = s[0], w = s[1], ch = s[2];
  if (patch < 1 || h % patch != 0 || w % patch != 0)
    throw ConfigError("image " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by patch " +
                      std::to_string(patch));
  const Index gh = h / patch, gw = w / patch, feat = patch * patch * ch;
  std::vector<Index> index;
  index.reserve(static_cast<std::size_t>(gh * gw * feat));
  for (Index r = 0; r < gh; ++r)
    for (Index c = 0; c < gw; ++c)
      for (Index dy = 0; dy < patch; ++dy)
        for (Index dx = 0; dx < patch; ++dx)
          for (Index k = 0; k < ch; ++k) index.push_back(((r * patch + dy) * w + (c * patch + dx)) * ch + k);
  const Var<Scalar> patches = gather(image, std::move(index), {gh * gw, feat});
  return add_rowwise(matmul(patches, weight), bias);
}

// 2x2 patch merge of H on a row-major h x w grid, channels ordered
// (0,0), (0,1), (1,0), (1,1), then a linear projection to the next width.
template <typename Scalar>
Var<Scalar> downsample(const Var<Scalar>& h, Index grid_h, Index grid_w, const Var<Scalar>& weight,
                       const Var<Scalar>& bias) {
  detail::require_rank(h.shape(), 2, "downsample");
  if (grid_h % 2 != 0 || grid_w % 2 != 0) throw ConfigError("downsample needs an even grid");
  if (h.dim(0) != grid_h * grid_w) throw DimensionError("downsample node count does not match grid");
  const Index c = h.dim(1), oh = grid_h / 2, ow = grid_w / 2;
  std::vector<Index> index;
  index.reserve(static_cast<std::size_t>(h.value().size()));
  for (Index r = 0; r < oh; ++r)
    for (Index col = 0; col < ow; ++col)
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b)
          for (Index k = 0; k < c; ++k) index.push_back(((2 * r + a) * grid_w + (2 * col + b)) * c + k);
  const Var<Scalar> merged = gather(h, std::move(index), {oh * ow, 4 * c});
  return add_rowwise(matmul(merged, weight), bias);
}

template <typename Scalar>
struct ForwardTrace {
  Tensor<Scalar> stem_output;
  std::vector<Tensor<Scalar>> block_outputs;  // after each block's FFN residual
  std::vector<BlockGraphs> graphs;
};

// Parameter indices of one block; -1 marks an absent tensor.
struct BlockSlots {
  BlockSpec spec;
  std::size_t stage = 0;
  Index index_in_stage = 0;
  Index global_index = 0;
  std::ptrdiff_t norm1_gamma = -1, norm1_beta = -1, local_alpha = -1, local_position_bias = -1;
  std::vector<std::ptrdiff_t> first, second;
  std::ptrdiff_t graph_epsilon = -1, out_weight = -1, out_bias = -1, layer_scale1 = -1;
  std::ptrdiff_t norm2_gamma = -1, norm2_beta = -1, fc1_weight = -1, fc1_bias = -1, ffn_epsilon = -1;
  std::ptrdiff_t fc2_weight = -1, fc2_bias = -1, layer_scale2 = -1;
};

enum class InitRule { kFanInUniform, kZeros, kOnes, kEpsilon, kLayerScale, kWindowUniform };

template <typename Scalar>
class PvgNet {
 public:
  explicit PvgNet(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    build_layout();
  }

  const ModelConfig& config() const { return config_; }
  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }
  const std::vector<BlockSlots>& blocks() const { return blocks_; }

  // Seeded initialization: fan-in uniform weights, zero biases, unit norm
  // scales, epsilon_init for GraphLU, layer_scale_init for LayerScale.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<Scalar>& t = params_[i];
      switch (rules_[i]) {
        case InitRule::kFanInUniform:
        case InitRule::kWindowUniform: {
          const double bound = 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
          std::uniform_real_distribution<double> dist(-bound, bound);
          for (Index j = 0; j < t.size(); ++j) t[j] = static_cast<Scalar>(dist(rng));
          break;
        }
        case InitRule::kZeros: t.data().setZero(); break;
        case InitRule::kOnes: t.data().setOnes(); break;
        case InitRule::kEpsilon: t.data().setConstant(static_cast<Scalar>(config_.epsilon_init)); break;
        case InitRule::kLayerScale: t.data().setConstant(static_cast<Scalar>(config_.layer_scale_init)); break;
      }
    }
  }

  // Zeroes every block's branch output projection and FFN output layer, which
  // turns each block into the identity map.
  void zero_branch_outputs() {
    for (const auto& b : blocks_)
      for (std::ptrdiff_t slot : {b.out_weight, b.out_bias, b.fc2_weight, b.fc2_bias})
        params_[static_cast<std::size_t>(slot)].data().setZero();
  }

  BlockWeights<Scalar> block_weights(const BlockSlots& b, const std::vector<Var<Scalar>>& v) const {
    auto get = [&](std::ptrdiff_t slot) { return slot < 0 ? Var<Scalar>() : v[static_cast<std::size_t>(slot)]; };
    BlockWeights<Scalar> w;
    w.norm1_gamma = get(b.norm1_gamma);
    w.norm1_beta = get(b.norm1_beta);
    w.local_alpha = get(b.local_alpha);
    w.local_position_bias = get(b.local_position_bias);
    for (auto s : b.first) w.first.push_back(get(s));
    for (auto s : b.second) w.second.push_back(get(s));
    w.graph_epsilon = get(b.graph_epsilon);
    w.out_weight = get(b.out_weight);
    w.out_bias = get(b.out_bias);
    w.layer_scale1 = get(b.layer_scale1);
    w.norm2_gamma = get(b.norm2_gamma);
    w.norm2_beta = get(b.norm2_beta);
    w.fc1_weight = get(b.fc1_weight);
    w.fc1_bias = get(b.fc1_bias);
    w.ffn_epsilon = get(b.ffn_epsilon);
    w.fc2_weight = get(b.fc2_weight);
    w.fc2_bias = get(b.fc2_bias);
    w.layer_scale2 = get(b.layer_scale2);
    return w;
  }

  // Logits [1 x num_classes] for image[h x w x 3] under the bound variables
  // (one per parameter, in parameter order).
  Var<Scalar> forward(const Var<Scalar>& image, const std::vector<Var<Scalar>>& vars,
                      ForwardTrace<Scalar>* trace = nullptr) const {
    if (vars.size() != params_.size()) throw DimensionError("bound variable count does not match parameters");
    if (image.shape() != Shape{config_.image_height, config_.image_width, ModelConfig::kChannels})
      throw DimensionError("image shape " + shape_str(image.shape()) + " does not match the model config");
    Var<Scalar> h = node_embedding(image, vars[stem_weight_], vars[stem_bias_], config_.patch_size);
    if (trace) trace->stem_output = h.value();
    auto block = blocks_.begin();
    for (std::size_t s = 0; s < kStages; ++s) {
      if (s > 0) {
        const auto [gh, gw] = config_.stage_grid(s - 1);
        h = downsample(h, gh, gw, vars[downsample_weight_[s]], vars[downsample_bias_[s]]);
      }
      for (; block != blocks_.end() && block->stage == s; ++block) {
        BlockGraphs graphs;
        h = pvg_block(h, block_weights(*block, vars), block->spec, trace ? &graphs : nullptr);
        if (trace) {
          trace->block_outputs.push_back(h.value());
          trace->graphs.push_back(std::move(graphs));
        }
      }
    }
    const Var<Scalar> pooled = reshape(reduce(h, 0, ReduceMode::kMean), {1, h.dim(1)});
    return add_rowwise(matmul(pooled, vars[head_weight_]), vars[head_bias_]);
  }

  Var<Scalar> forward(const Var<Scalar>& image, ForwardTrace<Scalar>* trace = nullptr) const {
    return forward(image, params_.bind(false), trace);
  }

  Tensor<Scalar> logits(const Tensor<Scalar>& image, ForwardTrace<Scalar>* trace = nullptr) const {
    NoGradGuard guard;
    return forward(Var<Scalar>(image), params_.bind(false), trace).value();
  }

  template <typename Other>
  PvgNet<Other> cast() const {
    PvgNet<Other> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = params_[i].template cast<Other>();
    return out;
  }

 private:
  std::ptrdiff_t add(const std::string& name, Shape shape, InitRule rule) {
    rules_.push_back(rule);
    return static_cast<std::ptrdiff_t>(params_.add(name, Tensor<Scalar>(std::move(shape))));
  }

  void build_layout() {
    const Index p = config_.patch_size;
    const Index c0 = config_.stage_widths[0];
    stem_weight_ = static_cast<std::size_t>(add("stem.weight", {p * p * ModelConfig::kChannels, c0}, InitRule::kFanInUniform));
    stem_bias_ = static_cast<std::size_t>(add("stem.bias", {c0}, InitRule::kZeros));
    const bool graphlu_act = config_.activation == ActivationKind::kGraphLU;
    std::ptrdiff_t shared_eps = -1;
    if (graphlu_act && config_.share_epsilon) shared_eps = add("epsilon", {1}, InitRule::kEpsilon);

    const Index total = config_.total_blocks();
    Index global = 0;
    downsample_weight_.assign(kStages, 0);
    downsample_bias_.assign(kStages, 0);
    for (std::size_t s = 0; s < kStages; ++s) {
      const Index width = config_.stage_widths[s];
      const std::string stage = "stages." + std::to_string(s);
      if (s > 0) {
        downsample_weight_[s] = static_cast<std::size_t>(
            add(stage + ".downsample.weight", {4 * config_.stage_widths[s - 1], width}, InitRule::kFanInUniform));
        downsample_bias_[s] = static_cast<std::size_t>(add(stage + ".downsample.bias", {width}, InitRule::kZeros));
      }
      const auto [gh, gw] = config_.stage_grid(s);
      const ChannelSchedule schedule = config_.stage_schedule(s);
      for (Index b = 0; b < config_.stage_depths[s]; ++b, ++global) {
        const std::string pre = stage + ".blocks." + std::to_string(b) + ".";
        BlockSlots slots;
        slots.stage = s;
        slots.index_in_stage = b;
        slots.global_index = global;
        BlockSpec& spec = slots.spec;
        spec.split = schedule.per_block[static_cast<std::size_t>(b)];
        spec.k = config_.k[s];
        spec.radius = config_.radius;
        spec.metric = config_.metric;
        spec.aggregator = config_.aggregator;
        spec.activation = config_.activation;
        spec.graphlu_form = config_.graphlu_form;
        spec.graph_mode = config_.graph_mode;
        spec.ffn_ratio = config_.ffn_ratio;
        spec.layer_scale = global >= total - config_.layer_scale_blocks;
        spec.grid = Grid::row_major(gh, gw);

        slots.norm1_gamma = add(pre + "norm1.gamma", {width}, InitRule::kOnes);
        slots.norm1_beta = add(pre + "norm1.beta", {width}, InitRule::kZeros);
        auto group = [&](const std::string& name, Index c, std::vector<std::ptrdiff_t>& out) {
          for (const auto& ps : aggregator_param_shapes(spec.group_spec(c)))
            out.push_back(add(pre + "graph." + name + "." + ps.name, ps.shape,
                              ps.shape.size() == 1 ? InitRule::kZeros : InitRule::kFanInUniform));
        };
        group("first", spec.split.first_c, slots.first);
        if (spec.split.second_c > 0) group("second", spec.split.second_c, slots.second);
        if (graphlu_act)
          slots.graph_epsilon = shared_eps >= 0 ? shared_eps : add(pre + "graph.epsilon", {1}, InitRule::kEpsilon);
        if (spec.split.local_c > 0) {
          const Shape table{window_size(spec.radius), spec.split.local_c};
          slots.local_alpha = add(pre + "local.alpha", table, InitRule::kWindowUniform);
          slots.local_position_bias = add(pre + "local.position_bias", table, InitRule::kZeros);
        }
        slots.out_weight = add(pre + "out.weight", {width, width}, InitRule::kFanInUniform);
        slots.out_bias = add(pre + "out.bias", {width}, InitRule::kZeros);
        if (spec.layer_scale) slots.layer_scale1 = add(pre + "layer_scale1", {width}, InitRule::kLayerScale);
        slots.norm2_gamma = add(pre + "norm2.gamma", {width}, InitRule::kOnes);
        slots.norm2_beta = add(pre + "norm2.beta", {width}, InitRule::kZeros);
        const Index hidden = config_.ffn_ratio * width;
        slots.fc1_weight = add(pre + "ffn.fc1.weight", {width, hidden}, InitRule::kFanInUniform);
        slots.fc1_bias = add(pre + "ffn.fc1.bias", {hidden}, InitRule::kZeros);
        if (graphlu_act)
          slots.ffn_epsilon = shared_eps >= 0 ? shared_eps : add(pre + "ffn.epsilon", {1}, InitRule::kEpsilon);
        slots.fc2_weight = add(pre + "ffn.fc2.weight", {hidden, width}, InitRule::kFanInUniform);
        slots.fc2_bias = add(pre + "ffn.fc2.bias", {width}, InitRule::kZeros);
        if (spec.layer_scale) slots.layer_scale2 = add(pre + "layer_scale2", {width}, InitRule::kLayerScale);
        blocks_.push_back(std::move(slots));
      }
    }
    const Index last = config_.stage_widths[kStages - 1];
    head_weight_ = static_cast<std::size_t>(add("head.weight", {last, config_.num_classes}, InitRule::kFanInUniform));
    head_bias_ = static_cast<std::size_t>(add("head.bias", {config_.num_classes}, InitRule::kZeros));
  }

  ModelConfig config_;
  ParameterSet<Scalar> params_;
  std::vector<InitRule> rules_;
  std::vector<BlockSlots> blocks_;
  std::size_t stem_weight_ = 0, stem_bias_ = 0, head_weight_ = 0, head_bias_ = 0;
  std::vector<std::size_t> downsample_weight_, downsample_bias_;
};

}  // namespace pvg
