#include "swp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "swp/errors.hpp"
#include "swp/metrics.hpp"

namespace swp {

namespace {

struct Momentum {
  std::vector<std::vector<double>> conv_w, conv_i, bn_gamma, bn_beta, lin_w, lin_b;

  explicit Momentum(const FsNetwork& net) {
    for (const auto& c : net.convs()) {
      conv_w.emplace_back(c.weight.size(), 0.0);
      conv_i.emplace_back(c.skeleton.values().size(), 0.0);
    }
    for (const auto& b : net.bns()) {
      bn_gamma.emplace_back(b.channels(), 0.0);
      bn_beta.emplace_back(b.channels(), 0.0);
    }
    for (const auto& l : net.linears()) {
      lin_w.emplace_back(l.weight.size(), 0.0);
      lin_b.emplace_back(l.bias.size(), 0.0);
    }
  }
};

// PyTorch-style SGD: buf = m * buf + (g + wd * p); p -= lr * buf. Returns max |step|.
double sgd(std::span<double> param, std::span<const double> grad, std::span<double> buf, double lr, double momentum,
           double wd) {
  double largest = 0.0;
  for (std::size_t k = 0; k < param.size(); ++k) {
    buf[k] = momentum * buf[k] + grad[k] + wd * param[k];
    const double step = lr * buf[k];
    param[k] -= step;
    largest = std::max(largest, std::abs(step));
  }
  return largest;
}

std::span<double> span_of(Tensor4& t) { return t.data(); }

}  // namespace

const char* to_string(TrainMode m) { return m == TrainMode::standard ? "standard" : "shape-only"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "standard") return TrainMode::standard;
  if (s == "shape-only" || s == "shape_only") return TrainMode::shape_only;
  throw UsageError("unknown training mode '" + s + "' (expected standard or shape-only)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw UsageError("weight decay must be non-negative");
  if (!(alpha_scale >= 0.0)) throw UsageError("alpha scale must be non-negative");
  for (std::size_t k = 0; k < milestones.size(); ++k) {
    if (milestones[k] >= epochs) throw UsageError("milestone " + std::to_string(milestones[k]) + " is not below epochs");
    if (k > 0 && milestones[k] <= milestones[k - 1]) throw UsageError("milestones must be strictly increasing");
  }
  sparsity.validate();
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.lr;
  for (auto m : cfg.milestones)
    if (epoch >= m) lr /= 10.0;
  return lr;
}

ArchSpec arch_for(const TrainConfig& cfg, const Dataset& sample) {
  ArchSpec spec = cfg.arch;
  spec.in_channels = sample.channels;
  spec.in_height = sample.height;
  spec.in_width = sample.width;
  spec.shared_skeleton = cfg.sparsity.mode == SparsityMode::group;
  return spec;
}

double evaluate(const FsNetwork& net, const Dataset& data, const DatasetSource& source, std::size_t batch) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.resize(std::min(batch, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor2 logits = net.predict(make_batch(data, idx, source));
    for (std::size_t r = 0; r < idx.size(); ++r)
      if (argmax_row(logits.row(r)) == data.labels[idx[r]]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate(const StripeModel& model, const Dataset& data, const DatasetSource& source, std::size_t batch) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.resize(std::min(batch, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor2 logits = run_model(model, make_batch(data, idx, source));
    for (std::size_t r = 0; r < idx.size(); ++r)
      if (argmax_row(logits.row(r)) == data.labels[idx[r]]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const TrainConfig& cfg, const DatasetSplit& data, const EpochCallback& on_epoch) {
  cfg.validate();
  const Dataset train_set = data.train.head(cfg.train_limit);
  const Dataset test_set = data.test.head(cfg.test_limit);
  if (train_set.size() == 0) throw UsageError("empty training set");

  FsNetwork net = FsNetwork::build(arch_for(cfg, train_set), cfg.seed);
  std::mt19937_64 shuffle_rng(cfg.seed + 1);
  std::mt19937_64 aug_rng(cfg.seed + 2);
  Momentum buf(net);

  const bool lasso = cfg.sparsity.mode == SparsityMode::lasso_weights;
  const bool shape_only = cfg.mode == TrainMode::shape_only;

  TrainResult result{net, {}};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t total_epochs = cfg.epochs + cfg.finetune_epochs;
  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const bool finetune = epoch >= cfg.epochs;
    const double lr = learning_rate(cfg, std::min(epoch, cfg.epochs - 1));
    const double alpha = finetune ? 0.0 : cfg.sparsity.alpha * cfg.alpha_scale;
    const bool train_skeleton = !cfg.freeze_skeleton && !lasso && !finetune;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    double max_update = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Tensor4 x = make_batch(train_set, idx, cfg.data, &aug_rng);
      const auto labels = batch_labels(train_set, idx);

      const Tensor2 logits = net.forward_train(x);
      XentResult xent = softmax_xent(logits, labels);
      if (!std::isfinite(xent.loss)) throw DivergedError(epoch + 1);
      loss_sum += xent.loss * static_cast<double>(count);
      NetworkGrads g = net.backward(xent.dlogits);

      auto& convs = net.convs();
      if (lasso && alpha > 0.0) {
        LassoPenalty lp = lasso_weight_penalty(convs, cfg.sparsity.mode);
        for (std::size_t l = 0; l < convs.size(); ++l) {
          auto dw = span_of(g.conv[l].dW);
          auto pg = span_of(lp.grad[l]);
          for (std::size_t k = 0; k < dw.size(); ++k) dw[k] += alpha * pg[k];
        }
      }
      const auto skel_grad = train_skeleton ? skeleton_penalty_grad(convs, alpha) : std::vector<std::vector<double>>{};

      for (std::size_t l = 0; l < convs.size(); ++l) {
        if (!shape_only)
          max_update = std::max(max_update, sgd(span_of(convs[l].weight), span_of(g.conv[l].dW), buf.conv_w[l], lr,
                                                cfg.momentum, cfg.weight_decay));
        if (!train_skeleton) continue;
        auto& sk = convs[l].skeleton;
        auto values = sk.values();
        auto mask = sk.frozen_mask();
        auto& b = buf.conv_i[l];
        for (std::size_t k = 0; k < values.size(); ++k) {
          if (mask[k]) {
            b[k] = 0.0;
            continue;
          }
          b[k] = cfg.momentum * b[k] + g.conv[l].dI[k] + skel_grad[l][k];
          values[k] -= lr * b[k];
        }
      }
      auto& bns = net.bns();
      for (std::size_t l = 0; l < bns.size(); ++l) {
        sgd(bns[l].gamma, g.bn[l].dgamma, buf.bn_gamma[l], lr, cfg.momentum, cfg.weight_decay);
        sgd(bns[l].beta, g.bn[l].dbeta, buf.bn_beta[l], lr, cfg.momentum, cfg.weight_decay);
      }
      auto& lins = net.linears();
      for (std::size_t l = 0; l < lins.size(); ++l) {
        sgd(lins[l].weight, g.linear[l].dW, buf.lin_w[l], lr, cfg.momentum, cfg.weight_decay);
        sgd(lins[l].bias, g.linear[l].db, buf.lin_b[l], lr, cfg.momentum, cfg.weight_decay);
      }
    }

    if (!cfg.freeze_skeleton && !finetune) prune(net.convs(), cfg.sparsity);

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.data_loss = loss_sum / static_cast<double>(order.size());
    m.penalty = lasso ? lasso_weight_penalty(net.convs(), cfg.sparsity.mode).value : skeleton_penalty(net.convs());
    m.alpha = alpha;
    m.test_acc = evaluate(net, test_set, cfg.data);
    m.frozen_stripes = frozen_stripe_count(net.convs());
    m.max_weight_update = max_update;
    if (!std::isfinite(m.data_loss) || !std::isfinite(m.penalty)) throw DivergedError(epoch + 1);
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.model = std::move(net);
  return result;
}

TrainResult train_shape_only(TrainConfig cfg, const DatasetSplit& data, const EpochCallback& on_epoch) {
  cfg.mode = TrainMode::shape_only;
  return train(cfg, data, on_epoch);
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string out = "epoch,data_loss,penalty,test_acc,frozen_stripes\n";
  char line[160];
  for (const auto& m : log) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%zu\n", m.epoch, m.data_loss, m.penalty, m.test_acc,
                  m.frozen_stripes);
    out += line;
  }
  return out;
}

std::vector<AblationRow> ablation_grid(const TrainConfig& base, const std::vector<double>& alphas,
                                       const std::vector<double>& deltas, const DatasetSplit& data) {
  if (alphas.empty() || deltas.empty()) throw UsageError("ablation grid needs at least one alpha and one delta");
  std::vector<AblationRow> rows;
  for (double a : alphas)
    for (double d : deltas) {
      TrainConfig cfg = base;
      cfg.sparsity.alpha = a;
      cfg.sparsity.delta = d;
      TrainResult r = train(cfg, data);
      const StripeModel model = export_model(r.model);
      const CostReport cost = count_flops(model, model.io.height, model.io.width);
      rows.push_back({a, d, cost.total_params(), cost.total_flops(),
                      evaluate(model, data.test.head(cfg.test_limit), cfg.data), r.log.back().frozen_stripes});
    }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "alpha,delta,params,flops,accuracy,frozen_stripes\n";
  char line[200];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%g,%g,%zu,%zu,%.4f,%zu\n", r.alpha, r.delta, r.params, r.flops, r.accuracy,
                  r.frozen_stripes);
    out += line;
  }
  return out;
}

std::vector<ComparePoint> compare_modes(const TrainConfig& base, const CompareOptions& opts, const DatasetSplit& data) {
  if (opts.deltas.empty()) throw UsageError("comparison needs at least one delta");
  std::vector<ComparePoint> points;
  for (SparsityMode mode : {SparsityMode::stripe, SparsityMode::group, SparsityMode::lasso_weights}) {
    for (std::size_t p = 0; p < opts.deltas.size(); ++p) {
      TrainConfig cfg = base;
      cfg.mode = TrainMode::standard;
      cfg.sparsity.mode = mode;
      cfg.sparsity.delta = opts.deltas[p];
      if (mode == SparsityMode::lasso_weights && opts.lasso_alpha > 0.0) cfg.sparsity.alpha = opts.lasso_alpha;
      TrainResult r = train(cfg, data);

      ComparePoint pt;
      pt.mode = mode;
      pt.point = p;
      pt.alpha = cfg.sparsity.alpha;
      pt.delta = cfg.sparsity.delta;
      for (std::size_t l = 0; l < r.model.convs().size(); ++l) {
        const auto& layer = r.model.convs()[l];
        const std::size_t dense = layer.filters() * layer.kernel() * layer.kernel();
        const std::size_t removed = frozen_stripe_count(std::span<const FsConvLayer>(&layer, 1));
        if (removed == dense) pt.invalid_layers.push_back(r.model.conv_name(l));
      }
      const StripeModel model = export_model(r.model);
      const CostReport cost = count_flops(model, model.io.height, model.io.width);
      pt.params = cost.total_params();
      pt.flops = cost.total_flops();
      pt.kept_stripes = cost.index_entries();
      pt.accuracy = evaluate(model, data.test.head(cfg.test_limit), cfg.data);
      points.push_back(std::move(pt));
    }
  }
  return points;
}

std::string compare_csv(const std::vector<ComparePoint>& points) {
  std::string out = "mode,point,alpha,delta,params,flops,accuracy,invalid_layers\n";
  char line[200];
  for (const auto& p : points) {
    std::string invalid;
    for (const auto& name : p.invalid_layers) invalid += (invalid.empty() ? "" : ";") + name;
    std::snprintf(line, sizeof line, "%s,%zu,%g,%g,%zu,%zu,%.4f,", to_string(p.mode), p.point, p.alpha, p.delta,
                  p.params, p.flops, p.accuracy);
    out += line;
    out += invalid + "\n";
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) throw UsageError("config: bad value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config: bad boolean '" + value + "' for " + key);
}

}  // namespace

TrainConfig parse_config(const std::string& text, TrainConfig cfg) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "arch") cfg.arch.arch = parse_arch(value);
    else if (key == "dataset") cfg.data = DatasetSource::defaults(parse_dataset_kind(value), cfg.data.directory);
    else if (key == "data_dir") cfg.data.directory = value;
    else if (key == "width1") cfg.arch.width1 = parse_number<std::size_t>(key, value);
    else if (key == "width2") cfg.arch.width2 = parse_number<std::size_t>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "lr") cfg.lr = parse_number<double>(key, value);
    else if (key == "milestones") {
      cfg.milestones.clear();
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ','))
        if (!trim(item).empty()) cfg.milestones.push_back(parse_number<std::size_t>(key, trim(item)));
    } else if (key == "momentum") cfg.momentum = parse_number<double>(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_number<double>(key, value);
    else if (key == "alpha") cfg.sparsity.alpha = parse_number<double>(key, value);
    else if (key == "alpha_scale") cfg.alpha_scale = parse_number<double>(key, value);
    else if (key == "delta") cfg.sparsity.delta = parse_number<double>(key, value);
    else if (key == "sparsity") cfg.sparsity.mode = parse_sparsity_mode(value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "mode") cfg.mode = parse_train_mode(value);
    else if (key == "freeze_skeleton") cfg.freeze_skeleton = parse_bool(key, value);
    else if (key == "train_limit") cfg.train_limit = parse_number<std::size_t>(key, value);
    else if (key == "test_limit") cfg.test_limit = parse_number<std::size_t>(key, value);
    else if (key == "finetune") cfg.finetune_epochs = parse_number<std::size_t>(key, value);
    else throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace swp
