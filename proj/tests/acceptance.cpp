// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Training criteria use tiny-vgg (widths 8/16) on the bundled 4000/1000 MNIST
// subset with the 20-epoch schedule. alpha_scale = 100 matches the cumulative
// skeleton shrinkage of the 160-epoch schedule (see TrainConfig::alpha_scale).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "model_gen.hpp"
#include "swp/metrics.hpp"
#include "swp/sparsity.hpp"
#include "swp/stripes.hpp"
#include "swp/trainer.hpp"

using namespace swp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const DatasetSplit& mnist() {
  static const DatasetSplit split = load_dataset(DatasetSource::defaults(DatasetKind::mnist, SWP_DATA_DIR));
  return split;
}

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.data = DatasetSource::defaults(DatasetKind::mnist, SWP_DATA_DIR);
  cfg.arch.arch = Arch::tiny_vgg;
  cfg.arch.width1 = 8;
  cfg.arch.width2 = 16;
  cfg.alpha_scale = 100.0;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Trained models shared between criteria, keyed by (alpha, seed) at delta 0.05.
std::map<std::pair<double, std::uint64_t>, TrainResult> runs;

const TrainResult& desk_run(double alpha, std::uint64_t seed) {
  const auto key = std::make_pair(alpha, seed);
  auto it = runs.find(key);
  if (it == runs.end()) {
    TrainConfig cfg = desk_config();
    cfg.sparsity.alpha = alpha;
    cfg.seed = seed;
    it = runs.emplace(key, train(cfg, mnist())).first;
  }
  return it->second;
}

Outcome reordering_identity() {
  test::Rng rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = test::pick(rng, 0, 1) ? 3 : 1;
    FsConvLayer layer = test::random_layer(rng, test::pick(rng, 1, 4), test::pick(rng, 1, 4), k, test::pick(rng, 1, 2));
    const Tensor4 x = test::random_tensor({2, layer.channels(), test::pick(rng, 3, 8), test::pick(rng, 3, 8)}, rng);
    const Tensor4 dense = kernels::serial::conv_forward(x, layer.effective_weight(), layer.params());
    worst = std::max(worst, max_abs_diff(stripe_conv_forward(extract_stripes(layer), x), dense));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 10.0, fmt("200 configs, max |stripe - dense| = %.3g (< 1e-10), %.2f s (< 10 s)", worst, secs)};
}

Outcome gradient_check() {
  test::Rng rng(1002);
  const auto t0 = std::chrono::steady_clock::now();
  double worst_w = 0.0, worst_i = 0.0, worst_x = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = test::pick(rng, 0, 1) ? 3 : 1;
    FsConvLayer layer = test::random_layer(rng, test::pick(rng, 1, 3), test::pick(rng, 1, 3), k, test::pick(rng, 1, 2),
                                           test::pick(rng, 0, 3) == 0);
    Tensor4 x = test::random_tensor({2, layer.channels(), test::pick(rng, 3, 5), test::pick(rng, 3, 5)}, rng);
    const auto loss = [&] { return test::sum_squares(fs_conv_forward(layer, x)); };
    Tensor4 dout = fs_conv_forward(layer, x);
    for (double& v : dout.data()) v *= 2.0;
    const LayerGrads g = fs_conv_backward(layer, x, dout);
    worst_w = std::max(worst_w, test::rel_error(g.dW.data(), test::numeric_grad(layer.weight.data(), loss)));
    worst_i = std::max(worst_i, test::rel_error(g.dI, test::numeric_grad(layer.skeleton.values(), loss)));
    worst_x = std::max(worst_x, test::rel_error(g.dX.data(), test::numeric_grad(x.data(), loss)));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_w < 1e-5 && worst_i < 1e-5 && worst_x < 1e-5 && secs < 30.0;
  return {ok, fmt("50 layers, max rel error dW %.2g, dI %.2g, dX %.2g (< 1e-5), %.2f s (< 30 s)", worst_w, worst_i,
                  worst_x, secs)};
}

Outcome merge_identity() {
  test::Rng rng(1003);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const FsConvLayer layer = test::random_layer(rng, test::pick(rng, 1, 4), test::pick(rng, 1, 4),
                                                 test::pick(rng, 0, 1) ? 3 : 1, test::pick(rng, 1, 2),
                                                 test::pick(rng, 0, 1) == 1, 0.3);
    const Tensor4 x = test::random_tensor({2, layer.channels(), test::pick(rng, 3, 8), test::pick(rng, 3, 8)}, rng);
    worst = std::max(worst, max_abs_diff(fs_conv_forward(merge_skeleton(layer), x), fs_conv_forward(layer, x)));
  }
  return {worst < 1e-12, fmt("50 layers, max |merged - FS| = %.3g (< 1e-12)", worst)};
}

Outcome pruned_path() {
  const TrainResult& r = desk_run(1.4e-5, 0);
  const FsNetwork& net = r.model;
  const Dataset& test = mnist().test;
  std::vector<std::size_t> all(test.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const Tensor4 x = make_batch(test, all, desk_config().data);
  const StripeModel model = export_model(net);
  const double logit_diff = max_abs_diff(run_model(model, x).data(), net.predict(x).data());

  FsNetwork pruned = net;
  SparsityConfig sc;
  sc.delta = 0.05;
  const std::size_t newly = prune(pruned.convs(), sc);
  const double before = evaluate(net, test, desk_config().data);
  const double after = evaluate(export_model(pruned), test, desk_config().data);
  const bool ok = logit_diff < 1e-8 && std::abs(after - before) <= 0.1;
  return {ok, fmt("%zu test images, %zu frozen stripes, max logit diff %.3g (< 1e-8); pruning at delta 0.05 froze %zu "
                  "more, accuracy %.2f%% -> %.2f%% (|diff| <= 0.1)",
                  test.size(), frozen_stripe_count(net.convs()), logit_diff, newly, before, after)};
}

Outcome accounting() {
  const PrunedLayerSpec spec{"layer1.1.conv2", 62, 64, 64, 3, 1, 300, 56};
  const StripeLayer layer = synthetic_stripe_layer(spec);
  const double ratio = count_params(std::span(&layer, 1)).pruning_ratio();

  const auto specs = resnet18_pruned_layers();
  const CostReport r = replay_layers(specs);
  bool consistent = r.layers.size() == specs.size() && std::isfinite(r.pruning_ratio());
  std::size_t w = 0, d = 0, idx = 0, f = 0;
  for (std::size_t k = 0; k < r.layers.size() && consistent; ++k) {
    const auto& l = r.layers[k];
    const auto& s = specs[k];
    consistent &= l.weight_params == s.kept_stripes * s.channels;
    consistent &= l.dense_weight_params == s.dense_filters * s.channels * s.kernel * s.kernel;
    consistent &= l.index_entries == s.kept_stripes;
    consistent &= l.flops == l.weight_params * 2 * s.out_hw * s.out_hw;
    consistent &= l.pruning_ratio >= 0.0 && l.pruning_ratio <= 1.0 && std::isfinite(l.pruning_ratio);
    w += l.weight_params;
    d += l.dense_weight_params;
    idx += l.index_entries;
    f += l.flops;
  }
  consistent &= r.weight_params() == w && r.dense_weight_params() == d && r.index_entries() == idx &&
                r.conv_flops() == f && r.total_params() == w + idx + r.aux_params;
  const bool ok = std::abs(ratio - 0.479) <= 0.001 && consistent;
  return {ok, fmt("ratio %.4f (0.479 +- 0.001); %zu-layer table: %zu weights + %zu indexes, %.2f GFLOPs, overall "
                  "ratio %.4f, %s",
                  ratio, r.layers.size(), w, idx, static_cast<double>(f) * 1e-9, r.pruning_ratio(),
                  consistent ? "consistent" : "INCONSISTENT")};
}

Outcome sparsity_trends() {
  const std::vector<double> alphas{0.5e-5, 1e-5, 1.4e-5};
  std::ostringstream detail;
  int monotone_seeds = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::size_t prev = 0;
    bool mono = true;
    detail << (seed ? "; " : "") << "seed " << seed << " frozen";
    for (double a : alphas) {
      const auto& r = desk_run(a, seed);
      const std::size_t f = r.log.back().frozen_stripes;
      mono &= f >= prev;
      prev = f;
      detail << " " << f << "@" << fmt("%.1f%%", r.test_accuracy());
    }
    monotone_seeds += mono;
  }
  detail << "; monotone in alpha for " << monotone_seeds << "/3 seeds";

  TrainConfig cfg = desk_config();
  const std::vector<double> deltas{0.01, 0.05, 0.09};
  const auto rows = ablation_grid(cfg, {1e-5, 1.4e-5}, deltas, mnist());
  bool grid_ok = true;
  for (std::size_t a = 0; a < 2; ++a) {
    detail << "; alpha " << fmt("%.2g", rows[a * 3].alpha) << " params/flops over delta";
    for (std::size_t d = 0; d < 3; ++d) {
      const auto& row = rows[a * 3 + d];
      detail << " " << row.params << "/" << row.flops;
      if (d > 0) grid_ok &= row.params <= rows[a * 3 + d - 1].params && row.flops <= rows[a * 3 + d - 1].flops;
    }
  }
  detail << (grid_ok ? " (non-increasing)" : " (NOT non-increasing)");
  return {monotone_seeds >= 2 && grid_ok, detail.str()};
}

Outcome shape_only() {
  TrainConfig cfg = desk_config();
  cfg.alpha_scale = 1.0;
  cfg.mode = TrainMode::shape_only;
  const auto r = train_shape_only(cfg, mnist());
  double max_update = 0.0;
  for (const auto& m : r.log) max_update = std::max(max_update, m.max_weight_update);
  cfg.freeze_skeleton = true;
  const auto control = train_shape_only(cfg, mnist());
  const bool ok = r.test_accuracy() >= 50.0 && max_update == 0.0 && control.test_accuracy() < 20.0;
  return {ok, fmt("trainable skeleton %.2f%% (>= 50%%), max weight update %g; control with W and I frozen %.2f%% "
                  "(< 20%%)",
                  r.test_accuracy(), max_update, control.test_accuracy())};
}

Outcome serialization() {
  test::Rng rng(1008);
  std::size_t exact = 0, rejected = 0, probes = 0;
  std::string unexpected;
  for (int rep = 0; rep < 100; ++rep) {
    const StripeModel m = test::random_model(rng);
    const auto bytes = serialize_model(m);
    const StripeModel back = deserialize_model(bytes);
    exact += back == m && serialize_model(back) == bytes;
    for (int t = 0; t < 4; ++t) {
      std::vector<std::uint8_t> bad = bytes;
      if (t % 2 == 0)
        bad.resize(test::pick(rng, 0, bytes.size() - 1));
      else
        bad[test::pick(rng, 0, bytes.size() - 1)] ^= static_cast<std::uint8_t>(1u << test::pick(rng, 0, 7));
      ++probes;
      try {
        deserialize_model(bad);
      } catch (const FormatError&) {
        ++rejected;
      } catch (const IntegrityError&) {
        ++rejected;
      } catch (const std::exception& e) {
        unexpected = e.what();
      }
    }
  }
  const bool ok = exact == 100 && rejected == probes && unexpected.empty();
  return {ok, fmt("%zu/100 bit-exact round trips; %zu/%zu truncated or corrupted files rejected%s%s", exact, rejected,
                  probes, unexpected.empty() ? "" : ", unexpected error: ", unexpected.c_str())};
}

Outcome determinism() {
  TrainConfig cfg = desk_config();
  cfg.sparsity.alpha = 1.4e-5;
  cfg.epochs = 3;
  cfg.milestones = {2};
  cfg.train_limit = 1000;
  cfg.seed = 7;
  const std::string a = metrics_csv(train(cfg, mnist()).log);
  const std::string b = metrics_csv(train(cfg, mnist()).log);
  return {a == b, fmt("two seeded runs: metrics CSVs of %zu bytes %s", a.size(), a == b ? "byte-identical" : "DIFFER")};
}

Outcome compare() {
  TrainConfig cfg = desk_config();
  cfg.sparsity.alpha = 1.4e-5;
  cfg.epochs = 5;
  cfg.milestones = {3, 4};
  CompareOptions opts;
  opts.deltas = {0.05, 0.6, 0.8, 0.9};
  const auto pts = compare_modes(cfg, opts, mnist());
  std::map<SparsityMode, std::size_t> count;
  bool complete = true, flags_ok = true;
  std::size_t flagged = 0;
  std::ostringstream detail;
  for (const auto& p : pts) {
    ++count[p.mode];
    complete &= std::isfinite(p.accuracy) && p.params > 0;
    // An empty model must flag every conv layer; a flagged layer implies a
    // point with fewer stripes than convs can hold.
    if (p.kept_stripes == 0) flags_ok &= p.invalid_layers.size() == 4;
    flagged += !p.invalid_layers.empty();
    detail << to_string(p.mode) << "@" << p.delta << " " << p.params << "p " << fmt("%.1f%%", p.accuracy);
    if (!p.invalid_layers.empty()) detail << " [" << p.invalid_layers.size() << " invalid]";
    detail << "; ";
  }
  complete &= count.size() == 3;
  for (const auto& [mode, n] : count) complete &= n == opts.deltas.size();
  detail << (complete ? "3 complete curves" : "INCOMPLETE curves") << ", " << flagged << " points with flagged layers";
  return {complete && flags_ok && flagged > 0, detail.str()};
}

}  // namespace

int main() {
  std::printf("acceptance suite: tiny-vgg 8/16 on %s\n", SWP_DATA_DIR);
  criterion(1, "reordering identity", reordering_identity);
  criterion(2, "gradient correctness", gradient_check);
  criterion(3, "merge identity", merge_identity);
  criterion(4, "pruned-path equivalence", pruned_path);
  criterion(5, "accounting reproduction", accounting);
  criterion(6, "desk-scale sparsity trends", sparsity_trends);
  criterion(7, "shape-only training", shape_only);
  criterion(8, "serialization", serialization);
  criterion(9, "determinism", determinism);
  criterion(10, "mode comparison harness", compare);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
