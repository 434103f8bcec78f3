// pvg: train, evaluate and inspect PVG models from the command line.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "pvg/core/pvgt.hpp"
#include "pvg/diag/diversity.hpp"
#include "pvg/diag/graph_stats.hpp"
#include "pvg/graph/export.hpp"
#include "pvg/net/checkpoint.hpp"
#include "pvg/net/count.hpp"
#include "pvg/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace pvg;

namespace {

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

int fail(const std::string& category, const std::string& message) {
  std::cerr << "error " << category << ": " << one_line(message) << '\n';
  return category == "usage" ? 2 : 1;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

// Labels default to the images path with a .csv extension.
std::string labels_for(const std::string& images, const std::string& labels) {
  return labels.empty() ? fs::path(images).replace_extension(".csv").string() : labels;
}

Tensor<float> checked_image(const Tensor<float>& images, Index idx, const ModelConfig& config) {
  if (images.rank() != 4) throw RankError("images must have rank 4");
  if (images.dim(1) != config.image_height || images.dim(2) != config.image_width || images.dim(3) != 3)
    throw CheckpointError("images are " + shape_str(images.shape()) + ", checkpoint expects " +
                          std::to_string(config.image_height) + "x" + std::to_string(config.image_width) + "x3");
  if (idx < 0 || idx >= images.dim(0))
    throw RangeError("image index " + std::to_string(idx) + " outside [0, " + std::to_string(images.dim(0)) + ")");
  const Index per = images.dim(1) * images.dim(2) * 3;
  return Tensor<float>({images.dim(1), images.dim(2), 3}, images.data().segment(idx * per, per));
}

int run_train(const std::string& config_path) {
  const RunConfig run = load_run_config(config_path);
  if (run.train_images.empty() || run.train_labels.empty())
    throw ConfigError("run config needs data.images and data.labels");
  const Dataset ds = load_dataset(run.train_images, run.train_labels, run.model.num_classes);
  const TrainResult result = train(run, ds);
  const EpochMetrics& last = result.metrics.back();
  std::cout << "epoch,step,train_loss,train_acc,lr\n";
  write_metrics_row(std::cout, last);
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& images, const std::string& labels) {
  const PvgNet<float> model = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(images, labels_for(images, labels), model.config().num_classes, "eval");
  const EvalResult r = evaluate(fs::path(checkpoint), ds);
  std::cout.precision(9);
  std::cout << "images,accuracy,loss\n" << ds.size() << ',' << r.accuracy << ',' << r.loss << '\n';
  return 0;
}

int run_diag(const std::string& checkpoint, const std::string& images, const std::string& out, Index limit,
             const std::string& run_id) {
  const PvgNet<float> model = load_checkpoint(checkpoint);
  const Tensor<float> all = read_pvgt(images);
  std::vector<Tensor<float>> batch;
  const Index n = all.rank() == 4 ? all.dim(0) : 0;
  for (Index i = 0; i < (limit > 0 ? std::min(limit, n) : n); ++i) batch.push_back(checked_image(all, i, model.config()));
  if (batch.empty()) throw RangeError("no images to trace");
  auto os = open_out(out);
  write_diversity_header(os);
  write_diversity_rows(os, trace_diversity(model, batch, run_id));
  return 0;
}

int run_export(const std::string& checkpoint, std::string images, Index image, Index block, const std::string& out,
               const std::string& group, const std::string& stats_out) {
  const PvgNet<float> model = load_checkpoint(checkpoint);
  if (images.empty()) {
    const auto manifest = read_checkpoint_manifest(checkpoint);
    images = manifest.value("/run/data/images"_json_pointer, std::string());
    if (images.empty()) throw ConfigError("no --data given and the checkpoint records no training images");
  }
  const Tensor<float> all = read_pvgt(images);
  const Tensor<float> x = checked_image(all, image, model.config());
  const Index blocks = static_cast<Index>(model.blocks().size());
  if (block < 0 || block >= blocks)
    throw RangeError("block " + std::to_string(block) + " outside [0, " + std::to_string(blocks) + ")");
  ForwardTrace<float> trace;
  model.logits(x, &trace);
  const BlockGraphs& graphs = trace.graphs[static_cast<std::size_t>(block)];
  if (group == "second" && !graphs.has_second)
    throw RangeError("block " + std::to_string(block) + " has no second-order group");
  const GraphTopology& topo = group == "second" ? graphs.second : graphs.first;
  auto os = open_out(out);
  write_edges_header(os);
  write_edges(os, block, topo);
  if (!stats_out.empty()) {
    auto ss = open_out(stats_out);
    write_graph_stats(ss, graph_stats(topo));
  }
  for (const auto& w : topo.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int run_count(const std::string& config_path) {
  const RunConfig run = load_run_config(config_path);
  const ModelCost cost = count_params_flops(run.model);
  const PvgNet<float> model(run.model);
  std::cout << "metric,value\n"
            << "params," << cost.params << '\n'
            << "params_enumerated," << model.params().total_count() << '\n'
            << "mult_adds," << cost.mult_adds << '\n'
            << "linear_weights," << cost.linear_weights << '\n';
  return 0;
}

int run_synth(Index count, Index size, std::uint64_t seed, const std::string& images, const std::string& labels) {
  const Dataset ds = make_patch_dataset(count, size, size, seed);
  save_dataset(images, labels_for(images, labels), ds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive vision graph training and diagnostics"};
  app.require_subcommand(1);

  std::string config, checkpoint, data, labels, out, group = "first", stats_out, run_id = "diag";
  Index image = 0, block = 0, limit = 0, count = 512, size = 32;
  std::uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", config, "Run config JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and loss of a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data, "Images PVGT file")->required();
  eval_cmd->add_option("--labels", labels, "Labels CSV (default: images path with .csv)");

  auto* diag_cmd = app.add_subcommand("diag", "Per-block diversity trace");
  diag_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  diag_cmd->add_option("--data", data, "Images PVGT file")->required();
  diag_cmd->add_option("--out", out, "Trace CSV")->required();
  diag_cmd->add_option("--limit", limit, "Trace only the first N images (0 = all)");
  diag_cmd->add_option("--run-id", run_id, "run_id column value");

  auto* export_cmd = app.add_subcommand("export-graph", "Edges of one block's graph for one image");
  export_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  export_cmd->add_option("--image", image, "Image index")->required();
  export_cmd->add_option("--block", block, "Block index")->required();
  export_cmd->add_option("--out", out, "Edges CSV")->required();
  export_cmd->add_option("--data", data, "Images PVGT file (default: the checkpoint's training images)");
  export_cmd->add_option("--group", group, "Channel group")->check(CLI::IsMember({"first", "second"}));
  export_cmd->add_option("--stats", stats_out, "Also write graph statistics CSV");

  auto* count_cmd = app.add_subcommand("count", "Parameter and multiply-add counts of a config");
  count_cmd->add_option("--config", config, "Run config JSON")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic two-class patch dataset");
  synth_cmd->add_option("--count", count, "Number of images");
  synth_cmd->add_option("--size", size, "Image side length");
  synth_cmd->add_option("--seed", seed, "Generator seed");
  synth_cmd->add_option("--out", out, "Images PVGT file")->required();
  synth_cmd->add_option("--labels", labels, "Labels CSV (default: images path with .csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*train_cmd) return run_train(config);
    if (*eval_cmd) return run_eval(checkpoint, data, labels);
    if (*diag_cmd) return run_diag(checkpoint, data, out, limit, run_id);
    if (*export_cmd) return run_export(checkpoint, data, image, block, out, group, stats_out);
    if (*count_cmd) return run_count(config);
    if (*synth_cmd) return run_synth(count, size, seed, out, labels);
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return fail("usage", "no subcommand");
}
