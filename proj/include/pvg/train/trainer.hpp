#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pvg/net/pvg_net.hpp"
#include "pvg/train/adamw.hpp"
#include "pvg/train/dataset.hpp"

namespace pvg {

struct RunConfig {
  ModelConfig model = ModelConfig::pvg_tiny();
  AdamWConfig optimizer;
  // Zero means derived: total = epochs * steps per epoch, warmup = 5% of it.
  long warmup_steps = 0;
  long total_steps = 0;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  std::string run_id = "run";
  std::string train_images;
  std::string train_labels;
  // Images traced for diversity after every epoch (0 disables).
  int diversity_probe = 16;

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

struct EpochMetrics {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double lr = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  PvgNet<float> model;
  std::vector<EpochMetrics> metrics;
};

// Mean cross-entropy and top-1 accuracy over the whole dataset.
EvalResult evaluate(const PvgNet<float>& model, const Dataset& dataset);
// Loads the checkpoint and checks it against the dataset geometry first.
EvalResult evaluate(const std::filesystem::path& checkpoint_dir, const Dataset& dataset);

// Seeded AdamW training. Writes metrics.csv, diversity.csv and checkpoint/
// under run.output_dir (when non-empty). After every epoch the whole training
// split is re-evaluated for the metrics row.
TrainResult train(const RunConfig& run, const Dataset& dataset);

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

}  // namespace pvg
