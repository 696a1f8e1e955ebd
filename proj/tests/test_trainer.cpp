#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "swp/sparsity.hpp"
#include "swp/trainer.hpp"

using namespace swp;

namespace {

const DatasetSplit& mnist() {
  static const DatasetSplit split = load_dataset(DatasetSource::defaults(DatasetKind::mnist, SWP_DATA_DIR));
  return split;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.data = DatasetSource::defaults(DatasetKind::mnist, SWP_DATA_DIR);
  cfg.arch.width1 = 3;
  cfg.arch.width2 = 4;
  cfg.epochs = 3;
  cfg.milestones = {2};
  cfg.batch_size = 32;
  cfg.train_limit = 256;
  cfg.test_limit = 100;
  return cfg;
}

}  // namespace

TEST_CASE("learning rate is a step function of the milestones") {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.milestones = {10, 15};
  for (std::size_t e = 0; e < 20; ++e) {
    const double expected = e < 10 ? 0.1 : e < 15 ? 0.01 : 0.001;
    CHECK(learning_rate(cfg, e) == doctest::Approx(expected).epsilon(1e-15));
  }
  cfg.milestones = {};
  CHECK(learning_rate(cfg, 19) == 0.1);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.milestones = {15, 10};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.sparsity.delta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("config files override defaults") {
  const TrainConfig cfg = parse_config(
      "# comment\n"
      "arch = tiny-resnet\n"
      "alpha = 2e-5   # trailing\n"
      "delta=0.07\n"
      "\n"
      "milestones = 4, 8\n"
      "sparsity = group\n"
      "mode = shape-only\n"
      "seed = 42\n"
      "freeze_skeleton = true\n",
      TrainConfig{});
  CHECK(cfg.arch.arch == Arch::tiny_resnet);
  CHECK(cfg.sparsity.alpha == 2e-5);
  CHECK(cfg.sparsity.delta == 0.07);
  CHECK(cfg.milestones == std::vector<std::size_t>{4, 8});
  CHECK(cfg.sparsity.mode == SparsityMode::group);
  CHECK(cfg.mode == TrainMode::shape_only);
  CHECK(cfg.seed == 42);
  CHECK(cfg.freeze_skeleton);
  CHECK(cfg.epochs == 20);
  CHECK_THROWS_AS(parse_config("colour = red\n", TrainConfig{}), UsageError);
  CHECK_THROWS_AS(parse_config("epochs = many\n", TrainConfig{}), UsageError);
  CHECK_THROWS_AS(parse_config("epochs\n", TrainConfig{}), UsageError);
}

TEST_CASE("metrics CSV layout") {
  EpochMetrics m;
  m.epoch = 2;
  m.data_loss = 0.5;
  m.penalty = 3.0;
  m.test_acc = 91.25;
  m.frozen_stripes = 7;
  const std::string csv = metrics_csv({m});
  CHECK(csv == "epoch,data_loss,penalty,test_acc,frozen_stripes\n2,0.5,3,91.25,7\n");
}

TEST_CASE("training is deterministic for a seed") {
  TrainConfig cfg = small_config();
  cfg.sparsity.alpha = 1e-4;
  cfg.alpha_scale = 10.0;
  const auto a = train(cfg, mnist());
  const auto b = train(cfg, mnist());
  CHECK(metrics_csv(a.log) == metrics_csv(b.log));
  cfg.seed = 1;
  CHECK(metrics_csv(train(cfg, mnist()).log) != metrics_csv(a.log));
}

TEST_CASE("no sparsity pressure freezes nothing") {
  TrainConfig cfg = small_config();
  cfg.sparsity.alpha = 0.0;
  cfg.sparsity.delta = 0.0;
  const auto r = train(cfg, mnist());
  REQUIRE(r.log.size() == 3);
  for (const auto& m : r.log) {
    CHECK(m.frozen_stripes == 0);
    CHECK(m.alpha == 0.0);
    CHECK(m.total_loss() == m.data_loss);
  }
  CHECK(r.test_accuracy() >= 0.0);
  CHECK(r.test_accuracy() <= 100.0);
}

TEST_CASE("frozen stripes stay frozen and the log decomposes the loss") {
  TrainConfig cfg = small_config();
  cfg.sparsity.alpha = 1e-2;
  cfg.alpha_scale = 10.0;
  cfg.sparsity.delta = 0.6;
  std::size_t last = 0;
  const auto r = train(cfg, mnist(), [&](const EpochMetrics& m) {
    CHECK(m.frozen_stripes >= last);
    last = m.frozen_stripes;
  });
  CHECK(last > 0);
  std::size_t frozen = 0;
  for (const auto& c : r.model.convs()) {
    frozen += c.skeleton.frozen_count();
    for (std::size_t k = 0; k < c.skeleton.values().size(); ++k)
      if (c.skeleton.frozen_mask()[k]) CHECK(c.skeleton.values()[k] == 0.0);
  }
  CHECK(frozen == last);
  for (const auto& m : r.log) {
    CHECK(m.alpha == doctest::Approx(0.1));
    CHECK(m.total_loss() == doctest::Approx(m.data_loss + 0.1 * m.penalty));
    // Penalty is the L1 norm of the final skeletons of that epoch.
    CHECK(m.penalty >= 0.0);
  }
  CHECK(r.log.back().penalty == doctest::Approx(skeleton_penalty(r.model.convs())));
}

TEST_CASE("shape-only training never moves the weights") {
  TrainConfig cfg = small_config();
  const FsNetwork init = FsNetwork::build(arch_for(cfg, mnist().train), cfg.seed);
  const auto r = train_shape_only(cfg, mnist());
  for (const auto& m : r.log) CHECK(m.max_weight_update == 0.0);
  for (std::size_t k = 0; k < init.convs().size(); ++k) CHECK(r.model.convs()[k].weight == init.convs()[k].weight);
  bool skeleton_moved = false;
  for (const auto& c : r.model.convs())
    for (double v : c.skeleton.values()) skeleton_moved |= v != 1.0;
  CHECK(skeleton_moved);

  cfg.freeze_skeleton = true;
  const auto control = train_shape_only(cfg, mnist());
  for (const auto& c : control.model.convs())
    for (double v : c.skeleton.values()) CHECK(v == 1.0);
  CHECK(control.log.back().frozen_stripes == 0);
}

TEST_CASE("standard training does move the weights") {
  const auto r = train(small_config(), mnist());
  CHECK(r.log.front().max_weight_update > 0.0);
}

TEST_CASE("group mode keeps one skeleton row per layer") {
  TrainConfig cfg = small_config();
  cfg.sparsity.mode = SparsityMode::group;
  cfg.sparsity.alpha = 1e-2;
  cfg.alpha_scale = 10.0;
  cfg.sparsity.delta = 0.6;
  const auto r = train(cfg, mnist());
  for (const auto& c : r.model.convs()) CHECK(c.skeleton.rows() == 1);
}

TEST_CASE("evaluation agrees between FS network and exported model") {
  TrainConfig cfg = small_config();
  cfg.sparsity.alpha = 1e-2;
  cfg.alpha_scale = 10.0;
  cfg.sparsity.delta = 0.5;
  const auto r = train(cfg, mnist());
  const Dataset test = mnist().test.head(200);
  const double fs = evaluate(r.model, test, cfg.data);
  CHECK(evaluate(export_model(r.model), test, cfg.data) == fs);
  CHECK(evaluate(r.model, test, cfg.data, 7) == fs);
}

TEST_CASE("ablation grid rows follow the alpha-major order") {
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.milestones = {};
  const auto rows = ablation_grid(cfg, {1e-4, 2e-4}, {0.01, 0.5}, mnist());
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].alpha == 1e-4);
  CHECK(rows[1].delta == 0.5);
  CHECK(rows[2].alpha == 2e-4);
  CHECK(rows[0].params >= rows[1].params);
  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("alpha,delta,params,flops,accuracy,frozen_stripes\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(ablation_grid(cfg, {1e-4}, {0.05}, mnist()).size() == 1);
}

TEST_CASE("mode comparison emits matched curves") {
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.milestones = {};
  CompareOptions opts;
  opts.deltas = {0.05, 2.0};
  const auto pts = compare_modes(cfg, opts, mnist());
  REQUIRE(pts.size() == 6);
  std::size_t per_mode[3] = {};
  for (const auto& p : pts) ++per_mode[static_cast<int>(p.mode)];
  CHECK(per_mode[0] == 2);
  CHECK(per_mode[1] == 2);
  CHECK(per_mode[2] == 2);
  // A threshold above every skeleton value empties every layer.
  for (const auto& p : pts)
    if (p.delta == 2.0 && p.mode != SparsityMode::lasso_weights) CHECK(!p.invalid_layers.empty());
  CHECK(compare_csv(pts).rfind("mode,point,alpha,delta,params,flops,accuracy,invalid_layers\n", 0) == 0);
}
