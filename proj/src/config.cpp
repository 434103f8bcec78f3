#include "pvg/net/config.hpp"

#include <string>

namespace pvg {

ActivationKind parse_activation(const std::string& name) {
  if (name == "graphlu") return ActivationKind::kGraphLU;
  if (name == "gelu") return ActivationKind::kGELU;
  if (name == "relu") return ActivationKind::kReLU;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kGraphLU: return "graphlu";
    case ActivationKind::kGELU: return "gelu";
    case ActivationKind::kReLU: return "relu";
  }
  return "?";
}

GraphMode parse_graph_mode(const std::string& name) {
  if (name == "per_group") return GraphMode::kPerGroup;
  if (name == "shared") return GraphMode::kShared;
  throw ConfigError("unknown graph mode '" + name + "'");
}

std::string to_string(GraphMode mode) { return mode == GraphMode::kShared ? "shared" : "per_group"; }

GraphLUForm parse_graphlu_form(const std::string& name) {
  if (name == "derived") return GraphLUForm::kDerived;
  if (name == "printed") return GraphLUForm::kPrinted;
  throw ConfigError("unknown graphlu form '" + name + "'");
}

std::string to_string(GraphLUForm form) { return form == GraphLUForm::kPrinted ? "printed" : "derived"; }

Index ModelConfig::total_blocks() const {
  Index total = 0;
  for (Index d : stage_depths) total += d;
  return total;
}

std::array<Index, 2> ModelConfig::stage_grid(std::size_t stage) const {
  Index h = image_height / patch_size, w = image_width / patch_size;
  for (std::size_t s = 0; s < stage; ++s) {
    h /= 2;
    w /= 2;
  }
  return {h, w};
}

ChannelSchedule ModelConfig::stage_schedule(std::size_t stage) const {
  return psgc_schedule(stage_widths[stage], stage_depths[stage], start_ratio[stage], end_ratio[stage], granularity);
}

void ModelConfig::validate() const {
  if (total_blocks() < 1) throw ConfigError("model needs at least one block");
  if (patch_size < 1 || image_height % patch_size != 0 || image_width % patch_size != 0)
    throw ConfigError("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                      " is not divisible by patch size " + std::to_string(patch_size));
  if (radius < 0) throw ConfigError("local radius must be non-negative");
  if (ffn_ratio < 1) throw ConfigError("ffn_ratio must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (layer_scale_blocks < 0) throw ConfigError("layer_scale_blocks must be non-negative");
  if (epsilon_init < kMinEpsilon) throw ConfigError("epsilon_init below the clamp");
  Index h = image_height / patch_size, w = image_width / patch_size;
  for (std::size_t s = 0; s < kStages; ++s) {
    if (s > 0) {
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("stage " + std::to_string(s) + " downsampling needs an even grid, got " +
                          std::to_string(h) + "x" + std::to_string(w));
      h /= 2;
      w /= 2;
    }
    if (stage_depths[s] < 0) throw ConfigError("negative stage depth");
    if (stage_widths[s] < 1) throw ConfigError("stage widths must be positive");
    if (stage_widths[s] % granularity != 0)
      throw ConfigError("stage width " + std::to_string(stage_widths[s]) + " not divisible by m=" +
                        std::to_string(granularity));
    if (stage_depths[s] > 0) {
      if (h * w < 2) throw ConfigError("stage " + std::to_string(s) + " has fewer than two nodes");
      if (k[s] < 1) throw ConfigError("k must be >= 1");
      stage_schedule(s);
    }
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"stage_depths", c.stage_depths},
                     {"stage_widths", c.stage_widths},
                     {"k", c.k},
                     {"r", c.radius},
                     {"start_ratio", c.start_ratio},
                     {"end_ratio", c.end_ratio},
                     {"granularity", c.granularity},
                     {"aggregator", to_string(c.aggregator)},
                     {"activation", to_string(c.activation)},
                     {"graphlu_form", to_string(c.graphlu_form)},
                     {"share_epsilon", c.share_epsilon},
                     {"epsilon_init", c.epsilon_init},
                     {"ffn_ratio", c.ffn_ratio},
                     {"layer_scale_init", c.layer_scale_init},
                     {"layer_scale_blocks", c.layer_scale_blocks},
                     {"num_classes", c.num_classes},
                     {"image_height", c.image_height},
                     {"image_width", c.image_width},
                     {"patch_size", c.patch_size},
                     {"metric", to_string(c.metric)},
                     {"graph_mode", to_string(c.graph_mode)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("stage_depths", c.stage_depths);
    get("stage_widths", c.stage_widths);
    get("k", c.k);
    get("r", c.radius);
    get("start_ratio", c.start_ratio);
    get("end_ratio", c.end_ratio);
    get("granularity", c.granularity);
    if (j.contains("aggregator")) c.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("graphlu_form")) c.graphlu_form = parse_graphlu_form(j.at("graphlu_form").get<std::string>());
    get("share_epsilon", c.share_epsilon);
    get("epsilon_init", c.epsilon_init);
    get("ffn_ratio", c.ffn_ratio);
    get("layer_scale_init", c.layer_scale_init);
    get("layer_scale_blocks", c.layer_scale_blocks);
    get("num_classes", c.num_classes);
    get("image_height", c.image_height);
    get("image_width", c.image_width);
    get("patch_size", c.patch_size);
    if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
    if (j.contains("graph_mode")) c.graph_mode = parse_graph_mode(j.at("graph_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

}  // namespace pvg
