#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "block_reference.hpp"
#include "grad_catalog.hpp"
#include "pvg/net/checkpoint.hpp"
#include "pvg/net/count.hpp"
#include "pvg/core/pvgt.hpp"

using namespace pvg;
using namespace pvg::test;

namespace {
Tensor<double> random_image(const ModelConfig& c, std::mt19937_64& rng) {
  return random_tensor({c.image_height, c.image_width, 3}, rng, 0, 1);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pvg_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}
}  // namespace

TEST_CASE("tiny config geometry and schedule") {
  const ModelConfig c = ModelConfig::pvg_tiny();
  CHECK(c.total_blocks() == 5);
  CHECK(c.stage_grid(0) == std::array<Index, 2>{16, 16});
  CHECK(c.stage_grid(3) == std::array<Index, 2>{2, 2});
  CHECK(c.stage_schedule(0).per_block[0] == ChannelSplit{16, 16, 0});
  CHECK(c.stage_schedule(2).per_block[1] == ChannelSplit{32, 32, 64});
  CHECK(c.stage_schedule(3).per_block[0] == ChannelSplit{192, 64, 0});
}

TEST_CASE("config validation and JSON") {
  ModelConfig c = ModelConfig::pvg_tiny();
  c.aggregator = AggregatorKind::kGIN;
  c.activation = ActivationKind::kReLU;
  c.graph_mode = GraphMode::kShared;
  c.stage_depths = {2, 0, 1, 1};
  nlohmann::json j = c;
  CHECK(j.get<ModelConfig>() == c);
  CHECK(nlohmann::json::parse(R"({"aggregator":"edgeconv"})").get<ModelConfig>().aggregator == AggregatorKind::kEdgeConv);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"aggregator":"gat"})").get<ModelConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"k":"four"})").get<ModelConfig>(), ConfigError);

  auto bad = [](auto mutate) {
    ModelConfig m = ModelConfig::pvg_tiny();
    mutate(m);
    CHECK_THROWS_AS(m.validate(), ConfigError);
  };
  bad([](ModelConfig& m) { m.patch_size = 3; });
  bad([](ModelConfig& m) { m.stage_widths[1] = 72; });
  bad([](ModelConfig& m) { m.stage_depths = {0, 0, 0, 0}; });
  bad([](ModelConfig& m) { m.image_height = 24; });  // 12 -> 6 -> 3 cannot halve again
  bad([](ModelConfig& m) { m.patch_size = 16; });     // stage 4 would be smaller than 1x1
  bad([](ModelConfig& m) { m.num_classes = 1; });
  bad([](ModelConfig& m) { m.start_ratio[0] = 0.0; });
  bad([](ModelConfig& m) { m.epsilon_init = -1.5; });
}

TEST_CASE("node embedding") {
  std::mt19937_64 rng(1);
  {
    const Tensor<double> image = random_tensor({32, 32, 3}, rng, 0, 1);
    const auto h = node_embedding(Var<double>(image), Var<double>(random_tensor({48, 32}, rng)),
                                  Var<double>(Tensor<double>({32})), 4);
    CHECK(h.shape() == Shape{64, 32});
  }
  {
    const auto constant = Tensor<double>::filled({8, 8, 3}, 0.3);
    const auto h = node_embedding(Var<double>(constant), Var<double>(random_tensor({12, 5}, rng)),
                                  Var<double>(random_tensor({5}, rng)), 2).value();
    for (Index i = 1; i < h.rows(); ++i) CHECK(h.matrix().row(i) == h.matrix().row(0));
  }
  {
    const Tensor<double> image = random_tensor({4, 6, 3}, rng, 0, 1);
    Tensor<double> eye({12, 12});
    eye.matrix().setIdentity();
    const auto h = node_embedding(Var<double>(image), Var<double>(eye), Var<double>(Tensor<double>({12})), 2).value();
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 6; ++c)
        for (Index k = 0; k < 3; ++k) {
          const Index node = (r / 2) * 3 + c / 2, feat = ((r % 2) * 2 + c % 2) * 3 + k;
          CHECK(h.at(node, feat) == image[(r * 6 + c) * 3 + k]);
        }
  }
  CHECK_THROWS_AS(node_embedding(Var<double>(Tensor<double>({6, 6, 3})), Var<double>(Tensor<double>({48, 2})),
                                 Var<double>(Tensor<double>({2})), 4),
                  ConfigError);
}

TEST_CASE("downsample") {
  std::mt19937_64 rng(2);
  const auto w = random_tensor({4 * 3, 5}, rng), b = random_tensor({5}, rng);
  const auto h = random_tensor({64, 3}, rng);
  const auto y = downsample(Var<double>(h), 8, 8, Var<double>(w), Var<double>(b)).value();
  CHECK(y.shape() == Shape{16, 5});
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) {
      Eigen::RowVectorXd merged(12);
      merged << h.matrix().row((2 * r) * 8 + 2 * c), h.matrix().row((2 * r) * 8 + 2 * c + 1),
          h.matrix().row((2 * r + 1) * 8 + 2 * c), h.matrix().row((2 * r + 1) * 8 + 2 * c + 1);
      const Eigen::RowVectorXd expect = merged * w.matrix() + b.data().transpose();
      CHECK((y.matrix().row(r * 4 + c) - expect).cwiseAbs().maxCoeff() < 1e-14);
    }
  Tensor<double> flat({64, 3});
  flat.matrix().rowwise() = Eigen::RowVector3d(0.1, -0.4, 2.0);
  const auto fy = downsample(Var<double>(flat), 8, 8, Var<double>(w), Var<double>(b)).value();
  for (Index i = 1; i < 16; ++i) CHECK(fy.matrix().row(i) == fy.matrix().row(0));
  CHECK_THROWS_AS(downsample(Var<double>(random_tensor({15, 3}, rng)), 5, 3, Var<double>(w), Var<double>(b)), ConfigError);
}

TEST_CASE("block matches the straight-line reference") {
  PvgNet<double> net(small_block_config());
  net.init(21);
  std::mt19937_64 rng(3);
  // Give every norm, bias, epsilon and table a non-default value.
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    auto& t = net.params()[i];
    if (net.params().name(i).find("epsilon") != std::string::npos) t[0] = 0.3;
    else if (t.rank() == 1) t = random_tensor(t.shape(), rng, 0.5, 1.5);
    else if (net.params().name(i).find("position_bias") != std::string::npos) t = random_tensor(t.shape(), rng);
  }
  for (std::size_t b = 0; b < net.blocks().size(); ++b) {
    const Index n = net.blocks()[b].spec.grid.nodes(), c = net.blocks()[b].spec.channels();
    REQUIRE(n == 16);
    const auto h = random_tensor({n, c}, rng);
    const auto got = pvg_block(Var<double>(h), net.block_weights(net.blocks()[b], net.params().bind(false)),
                               net.blocks()[b].spec).value();
    const Mat ref = ref_block(net, b, h.matrix());
    CHECK((got.matrix() - ref).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("zeroed branch outputs make every block the identity") {
  for (auto cfg : {ModelConfig::pvg_tiny(), small_block_config()}) {
    PvgNet<double> net(cfg);
    net.init(4);
    net.zero_branch_outputs();
    std::mt19937_64 rng(5);
    const auto vars = net.params().bind(false);
    for (const auto& slots : net.blocks()) {
      const auto h = random_tensor({slots.spec.grid.nodes(), slots.spec.channels()}, rng);
      CHECK(pvg_block(Var<double>(h), net.block_weights(slots, vars), slots.spec).value() == h);
    }
    ForwardTrace<double> trace;
    net.logits(random_image(cfg, rng), &trace);
    // Within a stage, block outputs repeat the stage input.
    for (std::size_t b = 1; b < net.blocks().size(); ++b)
      if (net.blocks()[b].stage == net.blocks()[b - 1].stage) CHECK(trace.block_outputs[b] == trace.block_outputs[b - 1]);
    if (net.blocks()[0].stage == 0) CHECK(trace.block_outputs[0] == trace.stem_output);
  }
}

TEST_CASE("second_c = 0 block runs local and first-order groups only") {
  ModelConfig cfg = small_block_config();
  cfg.end_ratio = cfg.start_ratio;
  PvgNet<double> net(cfg);
  net.init(6);
  for (const auto& b : net.blocks()) {
    CHECK(b.spec.split.second_c == 0);
    CHECK(b.second.empty());
  }
  std::mt19937_64 rng(7);
  ForwardTrace<double> trace;
  net.logits(random_image(cfg, rng), &trace);
  for (const auto& g : trace.graphs) CHECK_FALSE(g.has_second);
}

TEST_CASE("shared graph mode builds one graph over both groups") {
  ModelConfig cfg = small_block_config();
  cfg.graph_mode = GraphMode::kShared;
  PvgNet<double> net(cfg);
  net.init(6);
  std::mt19937_64 rng(8);
  ForwardTrace<double> trace;
  net.logits(random_image(cfg, rng), &trace);
  REQUIRE(trace.graphs[2].has_second);
  CHECK(trace.graphs[2].first.neighbor_idx == trace.graphs[2].second.neighbor_idx);
}

TEST_CASE("permuting nodes with their grid cells permutes the block output") {
  PvgNet<double> net(small_block_config());
  net.init(9);
  std::mt19937_64 rng(10);
  const BlockSlots& slots = net.blocks()[2];
  const Index n = 16, c = slots.spec.channels();
  const auto h = random_tensor({n, c}, rng);
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::array<Index, 2>> coords;
  Tensor<double> hp({n, c});
  for (Index p = 0; p < n; ++p) {
    coords.push_back(slots.spec.grid.coord(perm[p]));
    hp.matrix().row(p) = h.matrix().row(perm[p]);
  }
  BlockSpec permuted = slots.spec;
  permuted.grid = Grid::from_coords(4, 4, coords);
  const auto vars = net.params().bind(false);
  const auto y = pvg_block(Var<double>(h), net.block_weights(slots, vars), slots.spec).value();
  const auto yp = pvg_block(Var<double>(hp), net.block_weights(slots, vars), permuted).value();
  for (Index p = 0; p < n; ++p) CHECK((yp.matrix().row(p) - y.matrix().row(perm[p])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward shape, determinism and LayerScale placement") {
  PvgNet<float> net(ModelConfig::pvg_tiny());
  net.init(11);
  std::mt19937_64 rng(12);
  const auto image = random_image(net.config(), rng).cast<float>();
  const auto a = net.logits(image), b = net.logits(image);
  CHECK(a.shape() == Shape{1, 2});
  CHECK(a == b);
  Index scaled = 0;
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const bool expect = i + 2 >= net.blocks().size();
    CHECK(net.blocks()[i].spec.layer_scale == expect);
    scaled += net.blocks()[i].spec.layer_scale;
  }
  CHECK(scaled == 2);
  CHECK(net.params().at("stages.3.blocks.0.layer_scale1")[0] == doctest::Approx(1e-5f));
  CHECK_THROWS_AS(net.logits(Tensor<float>({16, 16, 3})), DimensionError);
}

TEST_CASE("stage k larger than the grid is clamped with a warning") {
  PvgNet<double> net(ModelConfig::pvg_tiny());
  net.init(13);
  std::mt19937_64 rng(14);
  ForwardTrace<double> trace;
  net.logits(random_image(net.config(), rng), &trace);
  const auto& last = trace.graphs.back().first;
  CHECK(last.k == 3);
  CHECK_FALSE(last.warnings.empty());
  for (const auto& g : trace.graphs) g.first.validate();
}

TEST_CASE("every parameter receives a gradient") {
  PvgNet<float> net(ModelConfig::pvg_tiny());
  net.init(15);
  std::mt19937_64 rng(16);
  const auto vars = net.params().bind(true);
  for (int i = 0; i < 2; ++i) {
    const auto image = random_image(net.config(), rng).cast<float>();
    backward(softmax_cross_entropy(net.forward(Var<float>(image), vars), {i}));
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    INFO(net.params().name(i));
    CHECK(vars[i].grad().data().cwiseAbs().maxCoeff() > 0.0f);
  }
}

TEST_CASE("shared epsilon is one tensor used by every activation") {
  ModelConfig cfg = small_block_config();
  cfg.share_epsilon = true;
  PvgNet<float> net(cfg);
  CHECK(net.params().contains("epsilon"));
  for (const auto& b : net.blocks()) {
    CHECK(b.graph_epsilon == b.ffn_epsilon);
    CHECK(b.graph_epsilon == static_cast<std::ptrdiff_t>(net.params().index_of("epsilon")));
  }
  cfg.activation = ActivationKind::kGELU;
  PvgNet<float> gelu(cfg);
  CHECK_FALSE(gelu.params().contains("epsilon"));
}

TEST_CASE("analytic counts match the enumerated parameters") {
  std::vector<ModelConfig> configs{ModelConfig::pvg_tiny(), small_block_config()};
  for (auto kind : {AggregatorKind::kMRGraphConv, AggregatorKind::kEdgeConv, AggregatorKind::kGraphSAGE,
                    AggregatorKind::kGIN}) {
    ModelConfig c = ModelConfig::pvg_tiny();
    c.aggregator = kind;
    configs.push_back(c);
  }
  ModelConfig shared = ModelConfig::pvg_tiny();
  shared.share_epsilon = true;
  shared.graph_mode = GraphMode::kShared;
  configs.push_back(shared);
  ModelConfig relu = ModelConfig::pvg_tiny();
  relu.activation = ActivationKind::kReLU;
  configs.push_back(relu);
  for (const auto& c : configs) {
    const PvgNet<float> net(c);
    CHECK(count_params_flops(c).params == net.params().total_count());
    Index linear = 0;
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      const auto& name = net.params().name(i);
      if (net.params()[i].rank() == 2 && name.find("weight") != std::string::npos) linear += net.params()[i].size();
    }
    CHECK(count_params_flops(c).linear_weights == linear);
  }
}

TEST_CASE("zero-depth stage adds only its downsample") {
  ModelConfig c = ModelConfig::pvg_tiny();
  c.stage_depths = {1, 1, 0, 1};
  c.layer_scale_blocks = 1;
  ModelConfig d = c;
  d.stage_depths = {1, 1, 1, 1};
  const PvgNet<float> with(d);
  Index stage2_blocks = 0;
  for (std::size_t i = 0; i < with.params().size(); ++i)
    if (with.params().name(i).rfind("stages.2.blocks.", 0) == 0) stage2_blocks += with.params()[i].size();
  CHECK(count_params_flops(d).params - count_params_flops(c).params == stage2_blocks);
  const PvgNet<float> without(c);
  CHECK(without.params().contains("stages.2.downsample.weight"));
  CHECK(count_params_flops(c).params == without.params().total_count());
}

TEST_CASE("doubling widths roughly quadruples linear weights") {
  ModelConfig c = ModelConfig::pvg_tiny();
  ModelConfig d = c;
  for (auto& w : d.stage_widths) w *= 2;
  const double ratio = static_cast<double>(count_params_flops(d).linear_weights) /
                       static_cast<double>(count_params_flops(c).linear_weights);
  CHECK(ratio > 3.9);
  CHECK(ratio <= 4.0);
}

TEST_CASE("checkpoint roundtrip and errors") {
  PvgNet<float> net(ModelConfig::pvg_tiny());
  net.init(17);
  std::mt19937_64 rng(18);
  for (std::size_t i = 0; i < net.params().size(); ++i)
    net.params()[i] = random_tensor(net.params()[i].shape(), rng).cast<float>();
  const auto dir = temp_dir("ckpt");
  save_checkpoint(dir, net, {{"note", "x"}});
  const PvgNet<float> back = load_checkpoint(dir);
  CHECK(back.config() == net.config());
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(back.params()[i] == net.params()[i]);
  const auto image = random_image(net.config(), rng).cast<float>();
  CHECK(back.logits(image) == net.logits(image));
  CHECK(read_checkpoint_manifest(dir)["run"]["note"] == "x");

  const auto manifest = dir / "manifest.json";
  nlohmann::json m = read_checkpoint_manifest(dir);
  auto rewrite = [&](const nlohmann::json& j) { std::ofstream(manifest) << j.dump(); };
  SUBCASE("missing parameter file") {
    std::filesystem::remove(dir / "head.bias.pvgt");
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("shape disagreement") {
    write_pvgt(dir / "head.bias.pvgt", Tensor<float>({3}));
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("config mismatch") {
    m["config"]["stage_widths"] = {32, 64, 128, 512};
    rewrite(m);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("invalid config") {
    m["config"]["patch_size"] = 3;
    rewrite(m);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("unknown parameter") {
    m["parameters"][0]["name"] = "bogus";
    rewrite(m);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("missing parameter entry") {
    m["parameters"].erase(0);
    rewrite(m);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  SUBCASE("wrong format tag") {
    m["format"] = "other";
    rewrite(m);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
}
