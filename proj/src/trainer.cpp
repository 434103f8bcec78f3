#include "pvg/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "pvg/diag/diversity.hpp"
#include "pvg/net/checkpoint.hpp"

namespace pvg {

void RunConfig::validate() const {
  model.validate();
  if (!(optimizer.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0)
    throw ConfigError("betas must lie in [0, 1)");
  if (optimizer.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warmup_steps < 0 || total_steps < 0) throw ConfigError("schedule steps must be non-negative");
  if (total_steps > 0 && total_steps < warmup_steps) throw ConfigError("total_steps must be >= warmup_steps");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"model", c.model},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"betas", {c.optimizer.beta1, c.optimizer.beta2}},
        {"eps", c.optimizer.eps},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"schedule", {{"warmup_steps", c.warmup_steps}, {"total_steps", c.total_steps}}},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"run_id", c.run_id},
      {"data", {{"images", c.train_images}, {"labels", c.train_labels}}},
      {"diversity_probe", c.diversity_probe}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  try {
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      if (o.contains("lr")) o.at("lr").get_to(c.optimizer.lr);
      if (o.contains("betas")) {
        const auto betas = o.at("betas").get<std::vector<double>>();
        if (betas.size() != 2) throw ConfigError("optimizer.betas needs two values");
        c.optimizer.beta1 = betas[0];
        c.optimizer.beta2 = betas[1];
      }
      if (o.contains("eps")) o.at("eps").get_to(c.optimizer.eps);
      if (o.contains("weight_decay")) o.at("weight_decay").get_to(c.optimizer.weight_decay);
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      if (s.contains("warmup_steps")) s.at("warmup_steps").get_to(c.warmup_steps);
      if (s.contains("total_steps")) s.at("total_steps").get_to(c.total_steps);
    }
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
    if (j.contains("run_id")) j.at("run_id").get_to(c.run_id);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("images")) d.at("images").get_to(c.train_images);
      if (d.contains("labels")) d.at("labels").get_to(c.train_labels);
    }
    if (j.contains("diversity_probe")) j.at("diversity_probe").get_to(c.diversity_probe);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig run = j.get<RunConfig>();
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  for (std::string* p : {&run.train_images, &run.train_labels})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  run.validate();
  return run;
}

void write_metrics_header(std::ostream& os) { os << "epoch,step,train_loss,train_acc,lr\n"; }

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
  const auto old = os.precision(9);
  os << m.epoch << ',' << m.step << ',' << m.train_loss << ',' << m.train_acc << ',' << m.lr << '\n';
  os.precision(old);
}

namespace {

void check_geometry(const ModelConfig& config, const Dataset& dataset, bool checkpoint) {
  if (dataset.height() != config.image_height || dataset.width() != config.image_width) {
    const std::string what = "dataset images are " + std::to_string(dataset.height()) + "x" +
                             std::to_string(dataset.width()) + ", model expects " +
                             std::to_string(config.image_height) + "x" + std::to_string(config.image_width);
    if (checkpoint) throw CheckpointError(what);
    throw ConfigError(what);
  }
  for (int label : dataset.labels)
    if (label < 0 || label >= config.num_classes) {
      const std::string what = "dataset label " + std::to_string(label) + " outside the model's classes";
      if (checkpoint) throw CheckpointError(what);
      throw RangeError(what);
    }
}

}  // namespace

EvalResult evaluate(const PvgNet<float>& model, const Dataset& dataset) {
  check_geometry(model.config(), dataset, false);
  NoGradGuard guard;
  const auto vars = model.params().bind(false);
  EvalResult result;
  double loss = 0.0;
  Index correct = 0;
  for (Index i = 0; i < dataset.size(); ++i) {
    const Tensor<float> logits = model.forward(Var<float>(dataset.image(i)), vars).value();
    const int label = dataset.labels[static_cast<std::size_t>(i)];
    loss += softmax_cross_entropy(Var<float>(logits), {label}).value()[0];
    Index best = 0;
    for (Index c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    correct += best == label;
  }
  const double n = static_cast<double>(std::max<Index>(1, dataset.size()));
  result.accuracy = static_cast<double>(correct) / n;
  result.loss = loss / n;
  return result;
}

EvalResult evaluate(const std::filesystem::path& checkpoint_dir, const Dataset& dataset) {
  const PvgNet<float> model = load_checkpoint(checkpoint_dir);
  check_geometry(model.config(), dataset, true);
  return evaluate(model, dataset);
}

TrainResult train(const RunConfig& run, const Dataset& dataset) {
  run.validate();
  check_geometry(run.model, dataset, false);
  if (dataset.size() < 1) throw ConfigError("empty training set");

  TrainResult result{PvgNet<float>(run.model), {}};
  PvgNet<float>& model = result.model;
  std::mt19937_64 rng(run.seed);
  model.init(rng());

  const long steps_per_epoch = (dataset.size() + run.batch_size - 1) / run.batch_size;
  const long total = run.total_steps > 0 ? run.total_steps : steps_per_epoch * run.epochs;
  const long warmup = run.warmup_steps > 0 ? run.warmup_steps : static_cast<long>(std::lround(0.05 * static_cast<double>(total)));

  auto& params = model.params();
  std::vector<bool> decay;
  for (std::size_t i = 0; i < params.size(); ++i) decay.push_back(params[i].rank() >= 2);
  AdamWState<float> state;

  std::ofstream metrics_csv, diversity_csv;
  const std::filesystem::path out_dir = run.output_dir;
  if (!run.output_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics_csv.open(out_dir / "metrics.csv");
    diversity_csv.open(out_dir / "diversity.csv");
    if (!metrics_csv || !diversity_csv) throw IoError("cannot write run outputs under " + out_dir.string());
    write_metrics_header(metrics_csv);
    write_diversity_header(diversity_csv);
  }
  std::vector<Tensor<float>> probe;
  for (Index i = 0; i < std::min<Index>(run.diversity_probe, dataset.size()); ++i) probe.push_back(dataset.image(i));

  std::vector<Index> order(static_cast<std::size_t>(dataset.size()));
  std::iota(order.begin(), order.end(), Index{0});
  long step = 0;
  double lr_t = 0.0;
  for (int epoch = 1; epoch <= run.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(run.batch_size), ++step) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(run.batch_size));
      const auto vars = params.bind(true);
      double batch_loss = 0.0;
      try {
        for (std::size_t b = begin; b < end; ++b) {
          const Index idx = order[b];
          const Var<float> logits = model.forward(Var<float>(dataset.image(idx)), vars);
          const Var<float> loss = softmax_cross_entropy(logits, {dataset.labels[static_cast<std::size_t>(idx)]});
          batch_loss += loss.value()[0];
          backward(loss);
        }
      } catch (const NonFiniteError& e) {
        throw EvaluationError("non-finite value at step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(batch_loss)) throw EvaluationError("non-finite loss at step " + std::to_string(step));
      const float inv = 1.0f / static_cast<float>(end - begin);
      std::vector<Tensor<float>> grads;
      grads.reserve(vars.size());
      for (const auto& v : vars) {
        Tensor<float> g = v.grad();
        g.data() *= inv;
        grads.push_back(std::move(g));
      }
      std::vector<Tensor<float>*> targets;
      std::vector<const Tensor<float>*> grad_ptrs;
      for (std::size_t i = 0; i < params.size(); ++i) {
        targets.push_back(&params[i]);
        grad_ptrs.push_back(&grads[i]);
      }
      lr_t = cosine_lr(step, run.optimizer.lr, warmup, total);
      adamw_step(targets, grad_ptrs, state, run.optimizer, lr_t, decay);
      for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].all_finite())
          throw EvaluationError("non-finite parameter " + params.name(i) + " after step " + std::to_string(step));
    }
    const EvalResult eval = evaluate(model, dataset);
    const EpochMetrics m{epoch, step, eval.loss, eval.accuracy, lr_t};
    result.metrics.push_back(m);
    if (metrics_csv.is_open()) {
      write_metrics_row(metrics_csv, m);
      metrics_csv.flush();
    }
    if (diversity_csv.is_open() && !probe.empty()) {
      std::vector<Tensor<float>> batch = probe;
      write_diversity_rows(diversity_csv, trace_diversity(model, batch, run.run_id + "/epoch" + std::to_string(epoch)));
    }
  }
  if (!run.output_dir.empty()) save_checkpoint(out_dir / "checkpoint", model,
                    {{"run_id", run.run_id},
                     {"seed", run.seed},
                     {"epochs", run.epochs},
                     {"data", {{"images", run.train_images}, {"labels", run.train_labels}}}});
  return result;
}

}  // namespace pvg
