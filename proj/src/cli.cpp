#include "swp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "swp/bench.hpp"
#include "swp/checkpoint.hpp"
#include "swp/errors.hpp"
#include "swp/metrics.hpp"
#include "swp/stripe_model.hpp"
#include "swp/trainer.hpp"

namespace swp {

namespace {

namespace fs = std::filesystem;

struct TrainFlags {
  std::optional<std::string> arch, sparsity, mode;
  std::optional<double> alpha, alpha_scale, delta, lr, momentum, weight_decay;
  std::optional<std::size_t> epochs, batch_size, width1, width2, train_limit, test_limit, finetune;
  std::optional<std::vector<std::size_t>> milestones;
  bool freeze_skeleton = false;

  void attach(CLI::App* app, bool with_delta = true) {
    app->add_option("--arch", arch, "tiny-vgg or tiny-resnet");
    app->add_option("--alpha", alpha, "skeleton L1 weight (default 1e-5)");
    app->add_option("--alpha-scale", alpha_scale, "multiplier on alpha for short schedules (default 1)");
    if (with_delta) app->add_option("--delta", delta, "freeze threshold (default 0.05)");
    app->add_option("--mode", mode, "standard or shape-only");
    app->add_option("--sparsity", sparsity, "stripe, group or lasso-weights");
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", lr);
    app->add_option("--milestones", milestones, "epochs at which lr is divided by 10")->delimiter(',');
    app->add_option("--momentum", momentum);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--width1", width1);
    app->add_option("--width2", width2);
    app->add_option("--train-limit", train_limit, "use the first N training images");
    app->add_option("--test-limit", test_limit, "use the first N test images");
    app->add_option("--finetune", finetune, "extra epochs without sparsity pressure after pruning");
    app->add_flag("--freeze-skeleton", freeze_skeleton, "keep skeletons fixed (control runs)");
  }

  void apply(TrainConfig& cfg) const {
    if (arch) cfg.arch.arch = parse_arch(*arch);
    if (sparsity) cfg.sparsity.mode = parse_sparsity_mode(*sparsity);
    if (mode) cfg.mode = parse_train_mode(*mode);
    if (alpha) cfg.sparsity.alpha = *alpha;
    if (alpha_scale) cfg.alpha_scale = *alpha_scale;
    if (delta) cfg.sparsity.delta = *delta;
    if (lr) cfg.lr = *lr;
    if (momentum) cfg.momentum = *momentum;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (width1) cfg.arch.width1 = *width1;
    if (width2) cfg.arch.width2 = *width2;
    if (train_limit) cfg.train_limit = *train_limit;
    if (test_limit) cfg.test_limit = *test_limit;
    if (finetune) cfg.finetune_epochs = *finetune;
    if (milestones) cfg.milestones = *milestones;
    if (freeze_skeleton) cfg.freeze_skeleton = true;
  }
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data_dir, config, dataset;
  std::string out = ".";
};

TrainConfig base_config(const Globals& g, const TrainFlags& flags) {
  TrainConfig cfg;
  if (g.config) cfg = load_config(*g.config, cfg);
  if (g.dataset) cfg.data = DatasetSource::defaults(parse_dataset_kind(*g.dataset), cfg.data.directory);
  if (g.data_dir) cfg.data.directory = *g.data_dir;
  if (g.seed) cfg.seed = *g.seed;
  flags.apply(cfg);
  cfg.validate();
  return cfg;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void print_epoch(std::ostream& out, const EpochMetrics& m) {
  char line[200];
  std::snprintf(line, sizeof line, "epoch %3zu  loss %.5f  penalty %.3f  test_acc %6.2f%%  frozen %zu\n", m.epoch,
                m.data_loss, m.penalty, m.test_acc, m.frozen_stripes);
  out << line << std::flush;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stripe-wise pruning with filter skeletons", "swp"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "seed for initialization, shuffling and augmentation");
  app.add_option("--data-dir", g.data_dir, "dataset directory");
  app.add_option("--dataset", g.dataset, "mnist or cifar10");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--config", g.config, "flat key = value config file");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train an FS network; writes checkpoint.swpc and metrics.csv");
  train_flags.attach(train_cmd);

  std::string checkpoint = "checkpoint.swpc";
  std::optional<double> prune_delta;
  std::optional<std::string> prune_sparsity;
  std::optional<std::size_t> prune_test_limit;
  auto* prune_cmd = app.add_subcommand("prune", "apply the threshold rule to a checkpoint; writes pruned.swpc");
  prune_cmd->add_option("--checkpoint", checkpoint, "checkpoint to prune (relative to --out)")->capture_default_str();
  prune_cmd->add_option("--delta", prune_delta, "freeze threshold")->required();
  prune_cmd->add_option("--sparsity", prune_sparsity, "threshold rule: stripe, group or lasso-weights");
  prune_cmd->add_option("--test-limit", prune_test_limit);

  bool no_compact = false;
  std::string export_name = "model.swpm";
  auto* export_cmd = app.add_subcommand("export", "convert a checkpoint into a stripe model file");
  export_cmd->add_option("--checkpoint", checkpoint, "checkpoint to export (relative to --out)")->capture_default_str();
  export_cmd->add_option("--name", export_name, "output file name")->capture_default_str();
  export_cmd->add_flag("--no-compact", no_compact, "keep filters that lost every stripe");

  std::string model_name = "model.swpm";
  std::optional<std::size_t> infer_test_limit;
  std::size_t show_logits = 0;
  auto* infer_cmd = app.add_subcommand("infer", "test accuracy of a stripe model");
  infer_cmd->add_option("--model", model_name, "model file (relative to --out)")->capture_default_str();
  infer_cmd->add_option("--test-limit", infer_test_limit);
  infer_cmd->add_option("--logits", show_logits, "print logits of the first N test images");

  BenchSpec bench_spec;
  std::vector<double> bench_grid{0.0, 0.25, 0.5, 0.75, 0.9};
  auto* bench_cmd = app.add_subcommand("bench", "dense vs stripe-wise kernel timing; writes bench.csv");
  bench_cmd->add_option("--grid", bench_grid, "sparsity levels")->delimiter(',');
  bench_cmd->add_option("--batch", bench_spec.batch)->capture_default_str();
  bench_cmd->add_option("--channels", bench_spec.channels)->capture_default_str();
  bench_cmd->add_option("--filters", bench_spec.filters)->capture_default_str();
  bench_cmd->add_option("--kernel", bench_spec.kernel)->capture_default_str();
  bench_cmd->add_option("--size", bench_spec.height, "spatial height = width")->capture_default_str();
  bench_cmd->add_option("--stride", bench_spec.stride)->capture_default_str();
  bench_cmd->add_option("--repeats", bench_spec.repeats)->capture_default_str();
  bench_cmd->add_flag("--serial", bench_spec.serial, "time the reference loop nests");

  TrainFlags ablate_flags;
  std::vector<double> alphas{0.5e-5, 1e-5, 1.4e-5}, deltas{0.01, 0.05, 0.09};
  auto* ablate_cmd = app.add_subcommand("ablate", "alpha x delta grid; writes ablation.csv");
  ablate_flags.attach(ablate_cmd, false);
  ablate_cmd->add_option("--alphas", alphas)->delimiter(',');
  ablate_cmd->add_option("--deltas", deltas)->delimiter(',');

  TrainFlags compare_flags;
  CompareOptions compare_opts;
  auto* compare_cmd = app.add_subcommand("compare", "stripe vs group vs lasso-weights; writes compare.csv");
  compare_flags.attach(compare_cmd, false);
  compare_cmd->add_option("--deltas", compare_opts.deltas)->delimiter(',');
  compare_cmd->add_option("--lasso-alpha", compare_opts.lasso_alpha, "alpha for lasso-weights mode (0: same as --alpha)");

  bool report_kv = false, report_shapes = false, report_resnet18 = false;
  auto* report_cmd = app.add_subcommand("report", "parameter, index and FLOP accounting of a stripe model");
  report_cmd->add_option("--model", model_name, "model file (relative to --out)")->capture_default_str();
  report_cmd->add_flag("--kv", report_kv, "one `layer.metric value` line per entry");
  report_cmd->add_flag("--shapes", report_shapes, "filter-shape histograms and per-position stripe ratios");
  report_cmd->add_flag("--resnet18", report_resnet18, "replay the pruned ResNet18 layer list instead of a model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const auto resolve = [&](const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() || fs::exists(p) ? p : fs::path(g.out) / p;
  };

  try {
    if (*train_cmd) {
      const TrainConfig cfg = base_config(g, train_flags);
      const DatasetSplit data = load_dataset(cfg.data);
      TrainResult r = train(cfg, data, [&](const EpochMetrics& m) { print_epoch(out, m); });
      save_checkpoint(r.model, out_path(g, "checkpoint.swpc"));
      write_text(out_path(g, "metrics.csv"), metrics_csv(r.log));
      out << "final test accuracy " << r.test_accuracy() << "%\n";
    } else if (*prune_cmd) {
      FsNetwork net = load_checkpoint(resolve(checkpoint));
      TrainConfig cfg = base_config(g, {});
      SparsityConfig sc = cfg.sparsity;
      sc.delta = *prune_delta;
      if (prune_sparsity) sc.mode = parse_sparsity_mode(*prune_sparsity);
      sc.validate();
      const std::size_t before = frozen_stripe_count(net.convs());
      const std::size_t changed = prune(net.convs(), sc);
      out << "newly frozen entries " << changed << ", frozen stripes " << before << " -> "
          << frozen_stripe_count(net.convs()) << "\n";
      if (fs::exists(cfg.data.directory)) {
        const Dataset test = load_dataset(cfg.data).test.head(prune_test_limit.value_or(0));
        out << "test accuracy after pruning " << evaluate(net, test, cfg.data) << "%\n";
      }
      save_checkpoint(net, out_path(g, "pruned.swpc"));
    } else if (*export_cmd) {
      const FsNetwork net = load_checkpoint(resolve(checkpoint));
      ExportOptions opts;
      opts.compact = !no_compact;
      const StripeModel model = export_model(net, opts);
      save_model(model, out_path(g, export_name));
      const CostReport cost = count_flops(model, model.io.height, model.io.width);
      out << "exported " << conv_layers(model).size() << " conv layers, " << cost.index_entries()
          << " stripes, params " << cost.total_params() << ", flops " << cost.total_flops() << "\n";
    } else if (*infer_cmd) {
      const StripeModel model = load_model(resolve(model_name));
      const TrainConfig cfg = base_config(g, {});
      const Dataset test = load_dataset(cfg.data).test.head(infer_test_limit.value_or(0));
      if (show_logits > 0) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < std::min(show_logits, test.size()); ++k) idx.push_back(k);
        const Tensor2 logits = run_model(model, make_batch(test, idx, cfg.data));
        out.precision(9);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          for (std::size_t c = 0; c < logits.cols(); ++c) out << (c ? " " : "") << logits(r, c);
          out << "\n";
        }
      }
      out << "test accuracy " << evaluate(model, test, cfg.data) << "% on " << test.size() << " images\n";
    } else if (*bench_cmd) {
      bench_spec.width = bench_spec.height;
      bench_spec.seed = g.seed.value_or(0);
      const std::string csv = bench_csv(bench_kernels(bench_spec, bench_grid));
      write_text(out_path(g, "bench.csv"), csv);
      out << csv;
    } else if (*ablate_cmd) {
      const TrainConfig cfg = base_config(g, ablate_flags);
      const std::string csv = ablation_csv(ablation_grid(cfg, alphas, deltas, load_dataset(cfg.data)));
      write_text(out_path(g, "ablation.csv"), csv);
      out << csv;
    } else if (*compare_cmd) {
      const TrainConfig cfg = base_config(g, compare_flags);
      const std::string csv = compare_csv(compare_modes(cfg, compare_opts, load_dataset(cfg.data)));
      write_text(out_path(g, "compare.csv"), csv);
      out << csv;
    } else if (*report_cmd) {
      if (report_resnet18) {
        const CostReport r = replay_layers(resnet18_pruned_layers());
        out << (report_kv ? r.key_values() : r.table());
        return 0;
      }
      const StripeModel model = load_model(resolve(model_name));
      const CostReport r = count_flops(model, model.io.height, model.io.width);
      out << (report_kv ? r.key_values() : r.table());
      if (report_shapes) {
        const auto hist = shape_histogram(model);
        const auto ratios = stripe_ratio_per_position(model);
        for (std::size_t l = 0; l < hist.size(); ++l) {
          out << r.layers[l].name << " shapes:";
          for (const auto& b : hist[l]) out << " 0x" << std::hex << b.mask << std::dec << "x" << b.frequency;
          out << "\n" << r.layers[l].name << " position ratios:";
          for (double v : ratios[l]) out << " " << v;
          out << "\n";
        }
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace swp
