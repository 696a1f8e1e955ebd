#include "swp/sparsity.hpp"

#include <cmath>

namespace swp {

const char* to_string(SparsityMode m) {
  switch (m) {
    case SparsityMode::stripe: return "stripe";
    case SparsityMode::group: return "group";
    case SparsityMode::lasso_weights: return "lasso-weights";
  }
  return "?";
}

SparsityMode parse_sparsity_mode(const std::string& s) {
  if (s == "stripe") return SparsityMode::stripe;
  if (s == "group") return SparsityMode::group;
  if (s == "lasso-weights" || s == "lasso") return SparsityMode::lasso_weights;
  throw UsageError("unknown sparsity mode '" + s + "' (expected stripe, group or lasso-weights)");
}

void SparsityConfig::validate() const {
  if (!(alpha >= 0.0)) throw UsageError("alpha must be >= 0");
  if (!(delta >= 0.0)) throw UsageError("delta must be >= 0");
}

double skeleton_penalty(std::span<const FsConvLayer> layers) {
  double total = 0.0;
  for (const auto& l : layers)
    for (double v : l.skeleton.values()) total += std::abs(v);
  return total;
}

std::vector<std::vector<double>> skeleton_penalty_grad(std::span<const FsConvLayer> layers, double alpha) {
  std::vector<std::vector<double>> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    const auto vals = l.skeleton.values();
    const auto frozen = l.skeleton.frozen_mask();
    std::vector<double> g(vals.size(), 0.0);
    for (std::size_t k = 0; k < vals.size(); ++k) {
      if (frozen[k] || vals[k] == 0.0) continue;
      g[k] = vals[k] > 0.0 ? alpha : -alpha;
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::size_t apply_threshold(std::span<FsConvLayer> layers, double delta) {
  std::size_t changed = 0;
  for (auto& l : layers) {
    const auto vals = l.skeleton.values();
    for (std::size_t k = 0; k < vals.size(); ++k)
      if (!l.skeleton.frozen_mask()[k] && std::abs(vals[k]) < delta && l.skeleton.freeze(k)) ++changed;
  }
  return changed;
}

double group_penalty_view(std::span<const FsConvLayer> layers, SparsityMode mode) {
  if (mode != SparsityMode::group) throw ModeError(std::string("group penalty requested in ") + to_string(mode) + " mode");
  for (const auto& l : layers)
    if (!l.skeleton.shared()) throw ModeError("group penalty requires layer-shared skeletons");
  return skeleton_penalty(layers);
}

namespace {

double stripe_norm(const FsConvLayer& l, std::size_t n, std::size_t i, std::size_t j) {
  double sq = 0.0;
  for (std::size_t c = 0; c < l.channels(); ++c) sq += l.weight(n, c, i, j) * l.weight(n, c, i, j);
  return std::sqrt(sq);
}

}  // namespace

LassoPenalty lasso_weight_penalty(std::span<const FsConvLayer> layers, SparsityMode mode) {
  if (mode != SparsityMode::lasso_weights)
    throw ModeError(std::string("weight group-lasso requested in ") + to_string(mode) + " mode");
  LassoPenalty p;
  for (const auto& l : layers) {
    Tensor4 g(l.weight.shape());
    for (std::size_t n = 0; n < l.filters(); ++n)
      for (std::size_t i = 0; i < l.kernel(); ++i)
        for (std::size_t j = 0; j < l.kernel(); ++j) {
          const double norm = stripe_norm(l, n, i, j);
          p.value += norm;
          if (norm < 1e-12) continue;
          for (std::size_t c = 0; c < l.channels(); ++c) g(n, c, i, j) = l.weight(n, c, i, j) / norm;
        }
    p.grad.push_back(std::move(g));
  }
  return p;
}

std::size_t apply_lasso_threshold(std::span<FsConvLayer> layers, double delta) {
  std::size_t changed = 0;
  for (auto& l : layers) {
    if (l.skeleton.shared()) throw ModeError("lasso pruning expects per-filter skeletons");
    for (std::size_t n = 0; n < l.filters(); ++n)
      for (std::size_t i = 0; i < l.kernel(); ++i)
        for (std::size_t j = 0; j < l.kernel(); ++j)
          if (stripe_norm(l, n, i, j) < delta && l.skeleton.freeze(l.skeleton.index(n, i, j))) ++changed;
  }
  return changed;
}

std::size_t frozen_stripe_count(std::span<const FsConvLayer> layers) {
  std::size_t total = 0;
  for (const auto& l : layers) {
    const std::size_t per_entry = l.skeleton.shared() ? l.filters() : 1;
    total += l.skeleton.frozen_count() * per_entry;
  }
  return total;
}

std::size_t prune(std::span<FsConvLayer> layers, const SparsityConfig& cfg) {
  cfg.validate();
  if (cfg.mode == SparsityMode::lasso_weights) return apply_lasso_threshold(layers, cfg.delta);
  return apply_threshold(layers, cfg.delta);
}

}  // namespace swp
