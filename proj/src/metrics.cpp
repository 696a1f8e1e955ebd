#include "swp/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace swp {

namespace {

template <typename F>
std::size_t sum_layers(const std::vector<LayerCost>& layers, F field) {
  std::size_t total = 0;
  for (const auto& l : layers) total += field(l);
  return total;
}

}  // namespace

std::size_t CostReport::weight_params() const { return sum_layers(layers, [](const auto& l) { return l.weight_params; }); }
std::size_t CostReport::dense_weight_params() const {
  return sum_layers(layers, [](const auto& l) { return l.dense_weight_params; });
}
std::size_t CostReport::index_entries() const { return sum_layers(layers, [](const auto& l) { return l.index_entries; }); }
std::size_t CostReport::index_bitmap_bits() const {
  return sum_layers(layers, [](const auto& l) { return l.index_bitmap_bits; });
}
std::size_t CostReport::index_bytes() const { return sum_layers(layers, [](const auto& l) { return l.index_bytes; }); }
std::size_t CostReport::conv_flops() const { return sum_layers(layers, [](const auto& l) { return l.flops; }); }
std::size_t CostReport::dense_conv_flops() const { return sum_layers(layers, [](const auto& l) { return l.dense_flops; }); }
std::size_t CostReport::total_params() const { return weight_params() + index_entries() + aux_params; }
std::size_t CostReport::total_flops() const { return conv_flops() + aux_flops; }

double CostReport::pruning_ratio() const {
  const std::size_t dense = dense_weight_params();
  return dense == 0 ? 0.0 : 1.0 - static_cast<double>(weight_params()) / static_cast<double>(dense);
}

std::string CostReport::table() const {
  std::ostringstream os;
  os << "# FLOPs count one multiply-accumulate as 2 operations; index entries are one (n,i,j) per kept stripe\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %6s %6s %4s %3s %8s %10s %10s %8s %12s %8s\n", "layer", "N", "C", "K", "s",
                "stripes", "weights", "dense_w", "indexes", "flops", "ratio");
  os << line;
  for (const auto& l : layers) {
    std::snprintf(line, sizeof line, "%-24s %6zu %6zu %4zu %3zu %8zu %10zu %10zu %8zu %12zu %8.4f\n", l.name.c_str(),
                  l.filters, l.channels, l.kernel, l.stride, l.kept_stripes, l.weight_params, l.dense_weight_params,
                  l.index_entries, l.flops, l.pruning_ratio);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-24s %6s %6s %4s %3s %8s %10zu %10zu %8zu %12zu %8.4f\n", "total(conv)", "", "",
                "", "", "", weight_params(), dense_weight_params(), index_entries(), conv_flops(), pruning_ratio());
  os << line;
  os << "aux params " << aux_params << ", aux flops " << aux_flops << "\n";
  os << "total params (weights + indexes + aux) " << total_params() << ", total flops " << total_flops() << "\n";
  os << "index cost: " << index_bytes() << " bytes as 16-bit packed entries, " << index_bitmap_bits()
     << " bits as a dense bitmap\n";
  return os.str();
}

std::string CostReport::key_values() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& l : layers) {
    os << l.name << ".filters " << l.filters << "\n";
    os << l.name << ".dense_filters " << l.dense_filters << "\n";
    os << l.name << ".channels " << l.channels << "\n";
    os << l.name << ".dense_channels " << l.dense_channels << "\n";
    os << l.name << ".kernel " << l.kernel << "\n";
    os << l.name << ".kept_stripes " << l.kept_stripes << "\n";
    os << l.name << ".weight_params " << l.weight_params << "\n";
    os << l.name << ".dense_weight_params " << l.dense_weight_params << "\n";
    os << l.name << ".index_entries " << l.index_entries << "\n";
    os << l.name << ".index_bitmap_bits " << l.index_bitmap_bits << "\n";
    os << l.name << ".flops " << l.flops << "\n";
    os << l.name << ".dense_flops " << l.dense_flops << "\n";
    os << l.name << ".pruning_ratio " << l.pruning_ratio << "\n";
  }
  os << "total.weight_params " << weight_params() << "\n";
  os << "total.dense_weight_params " << dense_weight_params() << "\n";
  os << "total.index_entries " << index_entries() << "\n";
  os << "total.index_bitmap_bits " << index_bitmap_bits() << "\n";
  os << "total.index_bytes " << index_bytes() << "\n";
  os << "total.aux_params " << aux_params << "\n";
  os << "total.params " << total_params() << "\n";
  os << "total.conv_flops " << conv_flops() << "\n";
  os << "total.dense_conv_flops " << dense_conv_flops() << "\n";
  os << "total.aux_flops " << aux_flops << "\n";
  os << "total.flops " << total_flops() << "\n";
  os << "total.pruning_ratio " << pruning_ratio() << "\n";
  return os.str();
}

LayerCost layer_cost(const StripeLayer& layer, std::string name, std::size_t out_h, std::size_t out_w) {
  const auto& m = layer.meta();
  LayerCost c;
  c.name = std::move(name);
  c.filters = m.filters;
  c.dense_filters = m.dense_filters;
  c.channels = m.channels;
  c.dense_channels = m.dense_channels;
  c.kernel = m.kernel;
  c.stride = m.stride;
  c.out_h = out_h;
  c.out_w = out_w;
  c.kept_stripes = layer.kept();
  c.weight_params = c.kept_stripes * m.channels;
  c.dense_weight_params = m.dense_filters * m.dense_channels * m.kernel * m.kernel;
  c.index_entries = c.kept_stripes;
  c.index_bitmap_bits = m.dense_filters * m.kernel * m.kernel;
  c.index_bytes = 2 * c.kept_stripes;
  c.flops = c.weight_params * 2 * out_h * out_w;
  c.dense_flops = c.dense_weight_params * 2 * out_h * out_w;
  c.pruning_ratio = 1.0 - static_cast<double>(c.weight_params) / static_cast<double>(c.dense_weight_params);
  return c;
}

CostReport count_params(std::span<const StripeLayer> layers, std::span<const std::string> names) {
  CostReport r;
  for (std::size_t k = 0; k < layers.size(); ++k)
    r.layers.push_back(layer_cost(layers[k], k < names.size() ? names[k] : "conv" + std::to_string(k)));
  return r;
}

CostReport count_params(const StripeModel& model) { return count_flops(model, model.io.height, model.io.width); }

CostReport count_flops(const StripeModel& model, std::size_t height, std::size_t width) {
  const auto shapes = model.register_shapes(1, height, width);
  CostReport r;
  std::size_t conv_index = 0;
  for (std::size_t k = 0; k < model.nodes.size(); ++k) {
    const auto& node = model.nodes[k];
    const Shape4& out = shapes[k];
    switch (node.kind) {
      case OpKind::stripe_conv:
        r.layers.push_back(layer_cost(node.conv, "conv" + std::to_string(conv_index++), out.h, out.w));
        r.aux_params += 2 * out.c;
        r.aux_flops += 2 * out.c * out.plane();
        break;
      case OpKind::linear:
        r.aux_params += node.linear.in * node.linear.out + node.linear.out;
        r.aux_flops += 2 * node.linear.in * node.linear.out;
        break;
      case OpKind::add: r.aux_flops += out.c * out.plane(); break;
      default: break;
    }
  }
  return r;
}

std::vector<ShapeBin> shape_histogram(const StripeLayer& layer) {
  const auto& m = layer.meta();
  if (m.kernel * m.kernel > 16) throw ShapeError("shape histogram supports K*K <= 16");
  std::vector<std::uint32_t> masks(m.filters, 0);
  for (const auto& s : layer.stripes()) masks[s.filter] |= 1u << (s.i * m.kernel + s.j);
  std::map<std::uint32_t, std::size_t> freq;
  for (auto mask : masks) ++freq[mask];
  if (m.dense_filters > m.filters) freq[0] += m.dense_filters - m.filters;
  std::vector<ShapeBin> bins;
  for (auto [mask, f] : freq) bins.push_back({mask, f});
  std::stable_sort(bins.begin(), bins.end(), [](const ShapeBin& a, const ShapeBin& b) { return a.frequency > b.frequency; });
  return bins;
}

std::vector<const StripeLayer*> conv_layers(const StripeModel& model) {
  std::vector<const StripeLayer*> out;
  for (const auto& n : model.nodes)
    if (n.kind == OpKind::stripe_conv) out.push_back(&n.conv);
  return out;
}

std::vector<std::vector<ShapeBin>> shape_histogram(const StripeModel& model) {
  std::vector<std::vector<ShapeBin>> out;
  for (const auto* l : conv_layers(model)) out.push_back(shape_histogram(*l));
  return out;
}

std::vector<double> stripe_ratio_per_position(const StripeLayer& layer) {
  const auto& m = layer.meta();
  std::vector<double> ratio(m.kernel * m.kernel, 0.0);
  for (const auto& s : layer.stripes()) ratio[s.i * m.kernel + s.j] += 1.0;
  for (double& r : ratio) r /= static_cast<double>(m.dense_filters);
  return ratio;
}

std::vector<std::vector<double>> stripe_ratio_per_position(const StripeModel& model) {
  std::vector<std::vector<double>> out;
  for (const auto* l : conv_layers(model)) out.push_back(stripe_ratio_per_position(*l));
  return out;
}

std::vector<PrunedLayerSpec> resnet18_pruned_layers() {
  // name, C, dense N, surviving N, K, stride, kept stripes, output H=W at 224x224 input
  return {
      {"conv1", 3, 64, 64, 7, 2, 324, 112},
      {"layer1.0.conv1", 64, 64, 57, 3, 1, 102, 56},
      {"layer1.0.conv2", 57, 64, 64, 3, 1, 164, 56},
      {"layer1.1.conv1", 64, 64, 62, 3, 1, 175, 56},
      {"layer1.1.conv2", 62, 64, 64, 3, 1, 300, 56},
      {"layer2.0.conv1", 64, 128, 119, 3, 2, 475, 28},
      {"layer2.0.conv2", 119, 128, 128, 3, 1, 636, 28},
      {"layer2.1.conv1", 128, 128, 128, 3, 1, 662, 28},
      {"layer2.1.conv2", 128, 128, 128, 3, 1, 648, 28},
      {"layer3.0.conv1", 128, 256, 252, 3, 2, 995, 14},
      {"layer3.0.conv2", 252, 256, 256, 3, 1, 1502, 14},
      {"layer3.1.conv1", 256, 256, 256, 3, 1, 1148, 14},
      {"layer3.1.conv2", 256, 256, 256, 3, 1, 944, 14},
      {"layer4.0.conv1", 256, 512, 498, 3, 2, 1304, 7},
      {"layer4.0.conv2", 498, 512, 512, 3, 1, 2448, 7},
      {"layer4.1.conv1", 512, 512, 512, 3, 1, 3111, 7},
      {"layer4.1.conv2", 512, 512, 512, 3, 1, 2927, 7},
  };
}

StripeLayer synthetic_stripe_layer(const PrunedLayerSpec& spec) {
  const std::size_t kk = spec.kernel * spec.kernel;
  if (spec.kept_stripes < spec.surviving_filters || spec.kept_stripes > spec.surviving_filters * kk)
    throw ShapeError("layer " + spec.name + ": kept stripes cannot cover the surviving filters");
  std::vector<StripeRecord> stripes;
  stripes.reserve(spec.kept_stripes);
  // Position-major round robin: every surviving filter gets one stripe before any gets two.
  for (std::size_t k = 0; k < spec.kept_stripes; ++k) {
    const std::size_t filter = k % spec.surviving_filters;
    const std::size_t pos = k / spec.surviving_filters;
    stripes.push_back({static_cast<std::uint32_t>(filter), static_cast<std::uint32_t>(pos / spec.kernel),
                       static_cast<std::uint32_t>(pos % spec.kernel), std::vector<double>(spec.channels, 0.0)});
  }
  const StripeMeta meta{spec.surviving_filters, spec.channels, spec.kernel, spec.stride, (spec.kernel - 1) / 2,
                        spec.dense_filters, spec.channels};
  return StripeLayer(meta, std::move(stripes));
}

CostReport replay_layers(std::span<const PrunedLayerSpec> specs) {
  CostReport r;
  for (const auto& s : specs) r.layers.push_back(layer_cost(synthetic_stripe_layer(s), s.name, s.out_hw, s.out_hw));
  return r;
}

}  // namespace swp
