#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "pvg/act/graphlu.hpp"
#include "pvg/agg/aggregators.hpp"
#include "pvg/graph/schedule.hpp"
#include "pvg/graph/similarity.hpp"

namespace pvg {

enum class ActivationKind { kGraphLU, kGELU, kReLU };
// Per-group builds one graph for each of the first- and second-order channel
// groups; shared builds one graph from both groups' channels together.
enum class GraphMode { kPerGroup, kShared };

ActivationKind parse_activation(const std::string& name);
std::string to_string(ActivationKind kind);
GraphMode parse_graph_mode(const std::string& name);
std::string to_string(GraphMode mode);

inline constexpr std::size_t kStages = 4;

struct ModelConfig {
  std::array<Index, kStages> stage_depths{1, 1, 2, 1};
  std::array<Index, kStages> stage_widths{32, 64, 128, 256};
  std::array<Index, kStages> k{4, 4, 8, 8};
  Index radius = 3;
  std::array<double, kStages> start_ratio{0.25, 0.25, 0.25, 0.25};
  std::array<double, kStages> end_ratio{0.75, 0.75, 0.75, 0.75};
  Index granularity = 16;
  AggregatorKind aggregator = AggregatorKind::kMaxE;
  ActivationKind activation = ActivationKind::kGraphLU;
  GraphLUForm graphlu_form = GraphLUForm::kDerived;
  bool share_epsilon = false;
  double epsilon_init = 0.0;
  Index ffn_ratio = 4;
  double layer_scale_init = 1e-5;
  Index layer_scale_blocks = 2;  // counted back from the last block
  Index num_classes = 2;
  Index image_height = 32;
  Index image_width = 32;
  Index patch_size = 2;
  Metric metric = Metric::kCosine;
  GraphMode graph_mode = GraphMode::kPerGroup;

  static constexpr Index kChannels = 3;

  // Desk-scale reference network.
  static ModelConfig pvg_tiny() { return ModelConfig{}; }

  Index total_blocks() const;
  // Patch-grid extent (height, width) of stage s.
  std::array<Index, 2> stage_grid(std::size_t stage) const;
  ChannelSchedule stage_schedule(std::size_t stage) const;

  // Throws ConfigError on any inconsistency.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace pvg
