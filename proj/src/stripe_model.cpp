#include "swp/stripe_model.hpp"

#include "byte_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>

namespace swp {

// ---------------------------------------------------------------------------
// Graph validation and inference

std::vector<Shape4> StripeModel::register_shapes(std::size_t batch, std::size_t height, std::size_t width) const {
  std::vector<Shape4> shapes;
  shapes.reserve(nodes.size());
  const Shape4 input{batch, io.channels, height, width};
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const ModelNode& node = nodes[k];
    auto reg = [&](int r) -> const Shape4& {
      if (r < kModelInput || r >= static_cast<int>(k))
        throw ShapeError("node " + std::to_string(k) + " reads register " + std::to_string(r) + " which is not yet defined");
      return r == kModelInput ? input : shapes[static_cast<std::size_t>(r)];
    };
    const Shape4 in = reg(node.input);
    switch (node.kind) {
      case OpKind::stripe_conv: {
        const auto& m = node.conv.meta();
        if (in.c != m.channels)
          throw ShapeError("node " + std::to_string(k) + ": conv expects " + std::to_string(m.channels) + " channels, gets " + std::to_string(in.c));
        if (node.scale.size() != m.filters || node.shift.size() != m.filters)
          throw ShapeError("node " + std::to_string(k) + ": affine size does not match filter count");
        shapes.push_back(kernels::conv_out_shape(in, m.filters, m.kernel, {m.stride, m.pad}));
        break;
      }
      case OpKind::relu: shapes.push_back(in); break;
      case OpKind::maxpool2:
        if (in.h < 2 || in.w < 2) throw ShapeError("node " + std::to_string(k) + ": maxpool input below 2x2");
        shapes.push_back({in.n, in.c, in.h / 2, in.w / 2});
        break;
      case OpKind::global_avgpool: shapes.push_back({in.n, in.c, 1, 1}); break;
      case OpKind::linear:
        if (in.c * in.plane() != node.linear.in || node.linear.weight.size() != node.linear.in * node.linear.out ||
            node.linear.bias.size() != node.linear.out)
          throw ShapeError("node " + std::to_string(k) + ": linear dims inconsistent with its input");
        shapes.push_back({in.n, node.linear.out, 1, 1});
        break;
      case OpKind::add:
        if (reg(node.input2) != in) throw ShapeError("node " + std::to_string(k) + ": add operands differ in shape");
        shapes.push_back(in);
        break;
      default: throw ShapeError("node " + std::to_string(k) + ": unknown op kind");
    }
  }
  return shapes;
}

void StripeModel::validate() const {
  if (nodes.empty()) throw ShapeError("model has no layers");
  const auto shapes = register_shapes(1, io.height, io.width);
  const Shape4& out = shapes.back();
  if (out.c != io.classes || out.h != 1 || out.w != 1) throw ShapeError("model output is not (classes, 1, 1)");
}

Tensor2 run_model(const StripeModel& model, const Tensor4& batch) {
  const auto& s = batch.shape();
  if (s.c != model.io.channels || s.h != model.io.height || s.w != model.io.width)
    throw ShapeError("run_model: batch " + to_string(s) + " does not match model input");
  std::vector<Tensor4> values(model.nodes.size());
  auto in = [&](int r) -> const Tensor4& { return r == kModelInput ? batch : values[static_cast<std::size_t>(r)]; };
  for (std::size_t k = 0; k < model.nodes.size(); ++k) {
    const ModelNode& node = model.nodes[k];
    const Tensor4& a = in(node.input);
    switch (node.kind) {
      case OpKind::stripe_conv: {
        Tensor4 y = stripe_conv_forward(node.conv, a);
        const auto& ys = y.shape();
        for (std::size_t n = 0; n < ys.n; ++n)
          for (std::size_t c = 0; c < ys.c; ++c) {
            double* p = y.plane(n, c);
            for (std::size_t q = 0; q < ys.plane(); ++q) p[q] = node.scale[c] * p[q] + node.shift[c];
          }
        values[k] = std::move(y);
        break;
      }
      case OpKind::relu: values[k] = relu_forward(a); break;
      case OpKind::maxpool2: values[k] = maxpool2_forward(a).out; break;
      case OpKind::global_avgpool: values[k] = global_avgpool_forward(a); break;
      case OpKind::linear: values[k] = linear_forward(node.linear, a); break;
      case OpKind::add: values[k] = elementwise(a, in(node.input2), ElementwiseOp::add); break;
    }
  }
  return to_tensor2(values.back());
}

// ---------------------------------------------------------------------------
// Export

namespace {

// Channels whose post-activation value is exactly zero everywhere can be
// dropped from the producing conv and from the channel-mixing consumers.
void compact_dead_filters(StripeModel& m) {
  const std::size_t count = m.nodes.size();
  std::vector<std::vector<std::size_t>> consumers(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& node = m.nodes[k];
    if (node.input >= 0) consumers[static_cast<std::size_t>(node.input)].push_back(k);
    if (node.kind == OpKind::add && node.input2 >= 0) consumers[static_cast<std::size_t>(node.input2)].push_back(k);
  }
  const auto shapes = m.register_shapes(1, m.io.height, m.io.width);

  for (std::size_t k = 0; k < count; ++k) {
    if (m.nodes[k].kind != OpKind::stripe_conv) continue;
    const StripeLayer& layer = m.nodes[k].conv;
    const std::size_t filters = layer.meta().filters;
    if (layer.surviving_filters().size() == filters) continue;

    // Follow channel-wise ops to the channel-mixing sinks, tracking the
    // constant value a stripe-less filter takes along the way.
    bool compactable = true;
    std::vector<std::pair<std::size_t, std::vector<double>>> sinks;
    std::function<void(std::size_t, const std::vector<double>&)> walk = [&](std::size_t reg, const std::vector<double>& vals) {
      if (consumers[reg].empty() && reg + 1 == count) compactable = false;
      for (std::size_t c : consumers[reg]) {
        switch (m.nodes[c].kind) {
          case OpKind::relu: {
            std::vector<double> r(vals);
            for (double& v : r) v = std::max(v, 0.0);
            walk(c, r);
            break;
          }
          case OpKind::maxpool2:
          case OpKind::global_avgpool: walk(c, vals); break;
          case OpKind::stripe_conv:
          case OpKind::linear: sinks.emplace_back(c, vals); break;
          case OpKind::add: compactable = false; break;
        }
      }
    };
    walk(k, m.nodes[k].shift);
    if (!compactable || sinks.empty()) continue;

    std::vector<bool> dead(filters, true);
    for (auto f : layer.surviving_filters()) dead[f] = false;
    for (const auto& [sink, vals] : sinks)
      for (std::size_t n = 0; n < filters; ++n)
        if (vals[n] != 0.0) dead[n] = false;
    std::size_t kept = static_cast<std::size_t>(std::count(dead.begin(), dead.end(), false));
    if (kept == filters) continue;
    if (kept == 0) {
      dead[0] = false;
      kept = 1;
    }

    std::vector<std::uint32_t> new_index(filters, 0);
    for (std::size_t n = 0, next = 0; n < filters; ++n)
      if (!dead[n]) new_index[n] = static_cast<std::uint32_t>(next++);

    ModelNode& producer = m.nodes[k];
    std::vector<StripeRecord> stripes = producer.conv.stripes();
    for (auto& s : stripes) s.filter = new_index[s.filter];
    StripeMeta meta = producer.conv.meta();
    meta.filters = kept;
    producer.conv = StripeLayer(meta, std::move(stripes));
    std::vector<double> scale, shift;
    for (std::size_t n = 0; n < filters; ++n)
      if (!dead[n]) {
        scale.push_back(producer.scale[n]);
        shift.push_back(producer.shift[n]);
      }
    producer.scale = std::move(scale);
    producer.shift = std::move(shift);

    std::set<std::size_t> done;
    for (const auto& [sink, vals] : sinks) {
      if (!done.insert(sink).second) continue;
      ModelNode& consumer = m.nodes[sink];
      if (consumer.kind == OpKind::stripe_conv) {
        std::vector<StripeRecord> cs = consumer.conv.stripes();
        for (auto& s : cs) {
          std::vector<double> w;
          for (std::size_t c = 0; c < filters; ++c)
            if (!dead[c]) w.push_back(s.weights[c]);
          s.weights = std::move(w);
        }
        StripeMeta cm = consumer.conv.meta();
        cm.channels = kept;
        consumer.conv = StripeLayer(cm, std::move(cs));
      } else {
        const Shape4& in = shapes[static_cast<std::size_t>(consumer.input)];
        const std::size_t plane = in.plane();
        Linear& lin = consumer.linear;
        std::vector<double> w;
        for (std::size_t o = 0; o < lin.out; ++o)
          for (std::size_t c = 0; c < filters; ++c)
            if (!dead[c])
              for (std::size_t q = 0; q < plane; ++q) w.push_back(lin.weight[o * lin.in + c * plane + q]);
        lin.in = kept * plane;
        lin.weight = std::move(w);
      }
    }
  }
}

}  // namespace

StripeModel export_model(const FsNetwork& net, const ExportOptions& opts) {
  const auto& spec = net.spec();
  StripeModel m;
  m.io = {spec.in_channels, spec.in_height, spec.in_width, spec.classes};
  const auto& fs_nodes = net.nodes();
  std::vector<int> remap(fs_nodes.size(), kModelInput);
  std::vector<std::size_t> uses(fs_nodes.size(), 0);
  for (const auto& n : fs_nodes) {
    if (n.input >= 0) ++uses[static_cast<std::size_t>(n.input)];
    if (n.kind == NodeKind::add && n.input2 >= 0) ++uses[static_cast<std::size_t>(n.input2)];
  }
  auto mapped = [&](int r) { return r == kNetworkInput ? kModelInput : remap[static_cast<std::size_t>(r)]; };

  for (std::size_t k = 0; k < fs_nodes.size(); ++k) {
    const Node& n = fs_nodes[k];
    ModelNode mn;
    mn.input = mapped(n.input);
    switch (n.kind) {
      case NodeKind::conv: {
        mn.kind = OpKind::stripe_conv;
        mn.conv = extract_stripes(net.convs()[n.param]);
        mn.scale.assign(mn.conv.meta().filters, 1.0);
        mn.shift.assign(mn.conv.meta().filters, 0.0);
        break;
      }
      case NodeKind::batchnorm: {
        const bool foldable = n.input >= 0 && fs_nodes[static_cast<std::size_t>(n.input)].kind == NodeKind::conv &&
                              uses[static_cast<std::size_t>(n.input)] == 1;
        if (!foldable) throw Error("export: batch norm '" + n.name + "' does not directly follow a conv");
        ModelNode& conv = m.nodes[static_cast<std::size_t>(mn.input)];
        net.bns()[n.param].folded(conv.scale, conv.shift);
        remap[k] = mn.input;
        continue;
      }
      case NodeKind::relu: mn.kind = OpKind::relu; break;
      case NodeKind::maxpool2: mn.kind = OpKind::maxpool2; break;
      case NodeKind::global_avgpool: mn.kind = OpKind::global_avgpool; break;
      case NodeKind::linear:
        mn.kind = OpKind::linear;
        mn.linear = net.linears()[n.param];
        break;
      case NodeKind::add:
        mn.kind = OpKind::add;
        mn.input2 = mapped(n.input2);
        break;
    }
    remap[k] = static_cast<int>(m.nodes.size());
    m.nodes.push_back(std::move(mn));
  }
  if (opts.compact) compact_dead_filters(m);
  m.validate();

  if (opts.verify) {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> dist;
    Tensor4 probe({4, spec.in_channels, spec.in_height, spec.in_width});
    for (double& v : probe.data()) v = dist(rng);
    const double diff = max_abs_diff(net.predict(probe).data(), run_model(m, probe).data());
    if (!(diff <= opts.verify_tolerance))
      throw Error("export verification failed: logits differ by " + std::to_string(diff));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'S', 'W', 'P', 'M'};
constexpr std::uint16_t kVersion = 1;

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw Error(std::string("cannot serialize: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

// Bounds applied before any allocation so corrupt headers cannot request huge buffers.
constexpr std::uint32_t kMaxDim = 1u << 16;

std::size_t bounded(std::uint32_t v, std::uint32_t lo, const char* what, std::size_t at) {
  if (v < lo || v > kMaxDim) throw FormatError(std::string("implausible ") + what + " " + std::to_string(v), at);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const StripeModel& model) {
  model.validate();
  detail::ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  w.u32(checked_u32(model.io.channels, "channels"));
  w.u32(checked_u32(model.io.height, "height"));
  w.u32(checked_u32(model.io.width, "width"));
  w.u32(checked_u32(model.io.classes, "classes"));
  w.u32(checked_u32(model.nodes.size(), "layer count"));
  w.crc_from(0);

  for (const auto& node : model.nodes) {
    const std::size_t start = w.size();
    w.u8(static_cast<std::uint8_t>(node.kind));
    w.i32(node.input);
    w.i32(node.kind == OpKind::add ? node.input2 : kModelInput);
    if (node.kind == OpKind::stripe_conv) {
      const auto& m = node.conv.meta();
      if (m.filters > 0xffff || m.kernel > 0xffff) throw Error("cannot serialize: stripe index exceeds 16 bits");
      for (std::size_t v : {m.filters, m.channels, m.kernel, m.stride, m.pad, m.dense_filters, m.dense_channels, node.conv.kept()})
        w.u32(checked_u32(v, "conv meta"));
      for (const auto& s : node.conv.stripes()) {
        w.u16(static_cast<std::uint16_t>(s.filter));
        w.u16(static_cast<std::uint16_t>(s.i));
        w.u16(static_cast<std::uint16_t>(s.j));
      }
      for (const auto& s : node.conv.stripes()) w.f32s(s.weights);
      w.f32s(node.scale);
      w.f32s(node.shift);
    } else if (node.kind == OpKind::linear) {
      w.u32(checked_u32(node.linear.in, "linear in"));
      w.u32(checked_u32(node.linear.out, "linear out"));
      w.f32s(node.linear.weight);
      w.f32s(node.linear.bias);
    }
    w.crc_from(start);
  }
  return w.take();
}

StripeModel deserialize_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.need(4, "magic");
  for (char c : kMagic)
    if (r.u8("magic") != static_cast<std::uint8_t>(c)) throw FormatError("bad magic (not an SWPM file)", 0);
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version), 4);
  StripeModel m;
  m.io.channels = r.u32("header");
  m.io.height = r.u32("header");
  m.io.width = r.u32("header");
  m.io.classes = r.u32("header");
  const std::uint32_t layers = r.u32("header");
  r.check_crc(0);
  bounded(static_cast<std::uint32_t>(m.io.channels), 1, "input channels", 6);
  bounded(static_cast<std::uint32_t>(m.io.height), 1, "input height", 10);
  bounded(static_cast<std::uint32_t>(m.io.width), 1, "input width", 14);
  bounded(static_cast<std::uint32_t>(m.io.classes), 1, "class count", 18);
  bounded(layers, 1, "layer count", 22);

  for (std::uint32_t k = 0; k < layers; ++k) {
    const std::size_t start = r.offset();
    ModelNode node;
    const std::uint8_t tag = r.u8("layer kind");
    if (tag < 1 || tag > 6) throw FormatError("unknown layer kind " + std::to_string(tag), start);
    node.kind = static_cast<OpKind>(tag);
    node.input = r.i32("layer input");
    node.input2 = r.i32("layer input");
    if (node.input < kModelInput || node.input >= static_cast<int>(k) || node.input2 < kModelInput ||
        node.input2 >= static_cast<int>(k))
      throw FormatError("layer input register out of range", start + 1);
    if (node.kind == OpKind::stripe_conv) {
      const std::size_t at = r.offset();
      StripeMeta meta;
      meta.filters = bounded(r.u32("conv meta"), 1, "filter count", at);
      meta.channels = bounded(r.u32("conv meta"), 1, "channel count", at + 4);
      meta.kernel = bounded(r.u32("conv meta"), 1, "kernel size", at + 8);
      meta.stride = bounded(r.u32("conv meta"), 1, "stride", at + 12);
      meta.pad = bounded(r.u32("conv meta"), 0, "padding", at + 16);
      meta.dense_filters = bounded(r.u32("conv meta"), 1, "dense filter count", at + 20);
      meta.dense_channels = bounded(r.u32("conv meta"), 1, "dense channel count", at + 24);
      const std::uint32_t kept = r.u32("conv meta");
      if (kept > meta.filters * meta.kernel * meta.kernel) throw FormatError("stripe count exceeds layer capacity", at + 28);
      r.need(static_cast<std::size_t>(kept) * 6, "stripe indexes");
      std::vector<StripeRecord> stripes(kept);
      for (auto& s : stripes) {
        s.filter = r.u16("stripe index");
        s.i = r.u16("stripe index");
        s.j = r.u16("stripe index");
      }
      r.need(static_cast<std::size_t>(kept) * meta.channels * 4, "stripe weights");
      for (auto& s : stripes) s.weights = r.f32s(meta.channels, "stripe weights");
      node.scale = r.f32s(meta.filters, "affine scale");
      node.shift = r.f32s(meta.filters, "affine shift");
      const std::size_t payload_end = r.offset();
      r.check_crc(start);
      try {
        std::vector<StripeRecord> sorted = stripes;
        node.conv = StripeLayer(meta, std::move(sorted));
      } catch (const ShapeError& e) {
        throw FormatError(std::string("invalid stripe layer: ") + e.what(), payload_end);
      }
      if (node.conv.stripes() != stripes) throw FormatError("stripes not stored in (filter, i, j) order", start);
      m.nodes.push_back(std::move(node));
      continue;
    }
    if (node.kind == OpKind::linear) {
      const std::size_t at = r.offset();
      node.linear.in = bounded(r.u32("linear meta"), 1, "linear inputs", at);
      node.linear.out = bounded(r.u32("linear meta"), 1, "linear outputs", at + 4);
      node.linear.weight = r.f32s(node.linear.in * node.linear.out, "linear weights");
      node.linear.bias = r.f32s(node.linear.out, "linear bias");
    }
    r.check_crc(start);
    m.nodes.push_back(std::move(node));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last layer", r.offset());
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent model: ") + e.what(), bytes.size());
  }
  return m;
}

void save_model(const StripeModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

StripeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace swp
