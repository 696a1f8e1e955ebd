#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "swp/dataset.hpp"
#include "swp/network.hpp"
#include "swp/sparsity.hpp"
#include "swp/stripe_model.hpp"

namespace swp {

enum class TrainMode { standard, shape_only };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  ArchSpec arch;  // input dims and class count are taken from the data
  DatasetSource data = DatasetSource::defaults(DatasetKind::mnist, "data/mnist-5k");
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double lr = 0.1;
  std::vector<std::size_t> milestones{10, 15};  // lr is divided by 10 at each
  double momentum = 0.9;
  double weight_decay = 1e-4;  // not applied to skeletons
  SparsityConfig sparsity;
  /// Multiplies alpha in the update. A desk run takes about 100x fewer
  /// optimizer steps than a 160-epoch CIFAR-10 schedule, so the same
  /// alpha applies about 100x less cumulative shrinkage to the skeleton.
  double alpha_scale = 1.0;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::standard;
  /// Keep skeletons fixed too (with shape-only: the random-features control).
  bool freeze_skeleton = false;
  std::size_t train_limit = 0;  // 0 = whole split
  std::size_t test_limit = 0;
  std::size_t finetune_epochs = 0;

  /// Throws UsageError on inconsistent settings.
  void validate() const;
};

/// Learning rate used during `epoch` (0-based).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double data_loss = 0.0;
  double penalty = 0.0;   // unscaled regularizer of the active mode
  double alpha = 0.0;     // effective: sparsity.alpha * alpha_scale
  double test_acc = 0.0;  // percent
  std::size_t frozen_stripes = 0;
  double max_weight_update = 0.0;  // largest |ΔW| applied to any conv weight

  double total_loss() const { return data_loss + alpha * penalty; }
};

struct TrainResult {
  FsNetwork model;
  std::vector<EpochMetrics> log;

  double test_accuracy() const { return log.empty() ? 0.0 : log.back().test_acc; }
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// SGD with momentum on weights and skeletons jointly; the threshold rule of
/// the sparsity mode runs at the end of every epoch.
TrainResult train(const TrainConfig& cfg, const DatasetSplit& data, const EpochCallback& on_epoch = {});

/// Weights stay at their random initialization; only skeletons, batch norm
/// and the linear head learn.
TrainResult train_shape_only(TrainConfig cfg, const DatasetSplit& data, const EpochCallback& on_epoch = {});

/// Architecture spec completed with the dataset's input shape.
ArchSpec arch_for(const TrainConfig& cfg, const Dataset& sample);

/// Test accuracy in percent.
double evaluate(const FsNetwork& net, const Dataset& data, const DatasetSource& source, std::size_t batch = 250);
double evaluate(const StripeModel& model, const Dataset& data, const DatasetSource& source, std::size_t batch = 250);

/// `epoch,data_loss,penalty,test_acc,frozen_stripes`
std::string metrics_csv(const std::vector<EpochMetrics>& log);

struct AblationRow {
  double alpha = 0.0, delta = 0.0;
  std::size_t params = 0, flops = 0;
  double accuracy = 0.0;
  std::size_t frozen_stripes = 0;
};

/// One training run per (alpha, delta) cell, alpha-major order.
std::vector<AblationRow> ablation_grid(const TrainConfig& base, const std::vector<double>& alphas,
                                       const std::vector<double>& deltas, const DatasetSplit& data);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct ComparePoint {
  SparsityMode mode = SparsityMode::stripe;
  std::size_t point = 0;
  double alpha = 0.0, delta = 0.0;
  std::size_t params = 0, flops = 0;
  double accuracy = 0.0;
  std::size_t kept_stripes = 0;
  std::vector<std::string> invalid_layers;  // layers left with zero stripes
};

struct CompareOptions {
  std::vector<double> deltas{0.05};
  double lasso_alpha = 0.0;  // 0: use the base alpha
};

/// Stripe, group and lasso-weights runs on identical seeds and budgets; each
/// delta yields one point per mode.
std::vector<ComparePoint> compare_modes(const TrainConfig& base, const CompareOptions& opts, const DatasetSplit& data);
std::string compare_csv(const std::vector<ComparePoint>& points);

/// Overrides `base` with flat `key = value` lines ('#' starts a comment).
TrainConfig parse_config(const std::string& text, TrainConfig base);
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base);

}  // namespace swp
