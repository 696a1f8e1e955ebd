#include "swp/network.hpp"

#include <cmath>
#include <random>

namespace swp {

const char* to_string(Arch a) {
  return a == Arch::tiny_vgg ? "tiny-vgg" : "tiny-resnet";
}

Arch parse_arch(const std::string& s) {
  if (s == "tiny-vgg") return Arch::tiny_vgg;
  if (s == "tiny-resnet") return Arch::tiny_resnet;
  throw UsageError("unknown architecture '" + s + "' (expected tiny-vgg or tiny-resnet)");
}

Tensor4 to_tensor4(const Tensor2& t) {
  return Tensor4({t.rows(), t.cols(), 1, 1}, std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor2 to_tensor2(const Tensor4& t) {
  const auto& s = t.shape();
  return Tensor2(s.n, s.c * s.plane(), std::vector<double>(t.data().begin(), t.data().end()));
}

void FsNetwork::add_node(NodeKind kind, int input, std::string name, int input2) {
  Node node{kind, input, input2, 0, std::move(name)};
  switch (kind) {
    case NodeKind::conv: node.param = convs_.size() - 1; break;
    case NodeKind::batchnorm: node.param = bns_.size() - 1; break;
    case NodeKind::linear: node.param = linears_.size() - 1; break;
    default: break;
  }
  nodes_.push_back(std::move(node));
}

int FsNetwork::conv_bn(int input, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride,
                       const std::string& prefix, bool relu) {
  convs_.push_back(FsConvLayer::create(out_c, in_c, k, stride, spec_.shared_skeleton));
  add_node(NodeKind::conv, input, prefix + "conv");
  bns_.push_back(BatchNorm::create(out_c));
  add_node(NodeKind::batchnorm, static_cast<int>(nodes_.size()) - 1, prefix + "bn");
  if (relu) add_node(NodeKind::relu, static_cast<int>(nodes_.size()) - 1, prefix + "relu");
  return static_cast<int>(nodes_.size()) - 1;
}

FsNetwork FsNetwork::build(const ArchSpec& spec, std::uint64_t seed) {
  FsNetwork net;
  net.spec_ = spec;
  const std::size_t w1 = spec.width1, w2 = spec.width2;
  int last = kNetworkInput;
  if (spec.arch == Arch::tiny_vgg) {
    last = net.conv_bn(last, spec.in_channels, w1, 3, 1, "features.0.", true);
    last = net.conv_bn(last, w1, w1, 3, 1, "features.1.", true);
    net.add_node(NodeKind::maxpool2, last, "features.pool1");
    last = net.conv_bn(static_cast<int>(net.nodes_.size()) - 1, w1, w2, 3, 1, "features.2.", true);
    last = net.conv_bn(last, w2, w2, 3, 1, "features.3.", true);
    net.add_node(NodeKind::maxpool2, last, "features.pool2");
  } else {
    const int stem = net.conv_bn(last, spec.in_channels, w1, 3, 1, "stem.", true);
    // Identity block.
    int a = net.conv_bn(stem, w1, w1, 3, 1, "layer1.0.1.", true);
    a = net.conv_bn(a, w1, w1, 3, 1, "layer1.0.2.", false);
    net.add_node(NodeKind::add, a, "layer1.0.add", stem);
    net.add_node(NodeKind::relu, static_cast<int>(net.nodes_.size()) - 1, "layer1.0.relu");
    const int block1 = static_cast<int>(net.nodes_.size()) - 1;
    // Downsampling block with a 1x1 projection shortcut.
    int b = net.conv_bn(block1, w1, w2, 3, 2, "layer2.0.1.", true);
    b = net.conv_bn(b, w2, w2, 3, 1, "layer2.0.2.", false);
    const int sc = net.conv_bn(block1, w1, w2, 1, 2, "layer2.0.shortcut.", false);
    net.add_node(NodeKind::add, b, "layer2.0.add", sc);
    net.add_node(NodeKind::relu, static_cast<int>(net.nodes_.size()) - 1, "layer2.0.relu");
  }
  net.add_node(NodeKind::global_avgpool, static_cast<int>(net.nodes_.size()) - 1, "avgpool");
  net.linears_.push_back(Linear::create(w2, spec.classes));
  net.add_node(NodeKind::linear, static_cast<int>(net.nodes_.size()) - 1, "fc");

  std::mt19937_64 rng(seed);
  for (auto& conv : net.convs_) {
    const double fan_in = static_cast<double>(conv.channels() * conv.kernel() * conv.kernel());
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : conv.weight.data()) v = dist(rng);
  }
  for (auto& lin : net.linears_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(lin.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : lin.weight) v = dist(rng);
    for (double& v : lin.bias) v = dist(rng);
  }
  return net;
}

std::string FsNetwork::conv_name(std::size_t param) const {
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::conv && n.param == param) return n.name;
  return "conv" + std::to_string(param);
}

Tensor2 FsNetwork::forward_train(const Tensor4& x) {
  cache_.values.assign(nodes_.size(), Tensor4());
  cache_.bn.assign(bns_.size(), BatchNormCache());
  cache_.argmax.assign(nodes_.size(), {});
  cache_.input_copy = x;
  cache_.input_shape = x.shape();
  auto in = [&](int r) -> const Tensor4& { return r == kNetworkInput ? cache_.input_copy : cache_.values[static_cast<std::size_t>(r)]; };
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& node = nodes_[k];
    const Tensor4& a = in(node.input);
    switch (node.kind) {
      case NodeKind::conv: cache_.values[k] = fs_conv_forward(convs_[node.param], a); break;
      case NodeKind::batchnorm: cache_.values[k] = batchnorm_forward_train(bns_[node.param], a, cache_.bn[node.param]); break;
      case NodeKind::relu: cache_.values[k] = relu_forward(a); break;
      case NodeKind::maxpool2: {
        auto r = maxpool2_forward(a);
        cache_.values[k] = std::move(r.out);
        cache_.argmax[k] = std::move(r.argmax);
        break;
      }
      case NodeKind::global_avgpool: cache_.values[k] = global_avgpool_forward(a); break;
      case NodeKind::linear: cache_.values[k] = linear_forward(linears_[node.param], a); break;
      case NodeKind::add: cache_.values[k] = elementwise(a, in(node.input2), ElementwiseOp::add); break;
    }
  }
  return to_tensor2(cache_.values.back());
}

NetworkGrads FsNetwork::backward(const Tensor2& dlogits) {
  if (cache_.values.size() != nodes_.size()) throw Error("backward called without a preceding forward_train");
  NetworkGrads g;
  g.conv.resize(convs_.size());
  g.bn.resize(bns_.size());
  g.linear.resize(linears_.size());
  std::vector<Tensor4> grad(nodes_.size());
  std::vector<bool> has(nodes_.size(), false);
  grad.back() = to_tensor4(dlogits);
  has.back() = true;
  if (grad.back().shape() != cache_.values.back().shape()) throw ShapeError("backward: dlogits shape mismatch");

  auto accumulate = [&](int r, Tensor4&& d) {
    if (r == kNetworkInput) return;
    const auto idx = static_cast<std::size_t>(r);
    if (!has[idx]) {
      grad[idx] = std::move(d);
      has[idx] = true;
    } else {
      grad[idx] = elementwise(grad[idx], d, ElementwiseOp::add);
    }
  };
  auto in = [&](int r) -> const Tensor4& { return r == kNetworkInput ? cache_.input_copy : cache_.values[static_cast<std::size_t>(r)]; };

  for (std::size_t k = nodes_.size(); k-- > 0;) {
    if (!has[k]) continue;
    const Node& node = nodes_[k];
    const Tensor4& dy = grad[k];
    const Tensor4& a = in(node.input);
    switch (node.kind) {
      case NodeKind::conv: {
        auto lg = fs_conv_backward(convs_[node.param], a, dy, node.input != kNetworkInput);
        if (node.input != kNetworkInput) accumulate(node.input, std::move(lg.dX));
        lg.dX = Tensor4();
        g.conv[node.param] = std::move(lg);
        break;
      }
      case NodeKind::batchnorm: {
        auto bg = batchnorm_backward(bns_[node.param], cache_.bn[node.param], dy);
        accumulate(node.input, std::move(bg.dX));
        bg.dX = Tensor4();
        g.bn[node.param] = std::move(bg);
        break;
      }
      case NodeKind::relu: accumulate(node.input, relu_backward(a, dy)); break;
      case NodeKind::maxpool2: accumulate(node.input, maxpool2_backward(a.shape(), cache_.argmax[k], dy)); break;
      case NodeKind::global_avgpool: accumulate(node.input, global_avgpool_backward(a.shape(), dy)); break;
      case NodeKind::linear: {
        auto lg = linear_backward(linears_[node.param], a, dy);
        accumulate(node.input, std::move(lg.dX));
        lg.dX = Tensor4();
        g.linear[node.param] = std::move(lg);
        break;
      }
      case NodeKind::add:
        accumulate(node.input, Tensor4(dy));
        accumulate(node.input2, Tensor4(dy));
        break;
    }
    grad[k] = Tensor4();
  }
  return g;
}

Tensor2 FsNetwork::predict(const Tensor4& x) const {
  std::vector<Tensor4> values(nodes_.size());
  auto in = [&](int r) -> const Tensor4& { return r == kNetworkInput ? x : values[static_cast<std::size_t>(r)]; };
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& node = nodes_[k];
    const Tensor4& a = in(node.input);
    switch (node.kind) {
      case NodeKind::conv: values[k] = fs_conv_forward(convs_[node.param], a); break;
      case NodeKind::batchnorm: values[k] = batchnorm_forward_eval(bns_[node.param], a); break;
      case NodeKind::relu: values[k] = relu_forward(a); break;
      case NodeKind::maxpool2: values[k] = maxpool2_forward(a).out; break;
      case NodeKind::global_avgpool: values[k] = global_avgpool_forward(a); break;
      case NodeKind::linear: values[k] = linear_forward(linears_[node.param], a); break;
      case NodeKind::add: values[k] = elementwise(a, in(node.input2), ElementwiseOp::add); break;
    }
  }
  return to_tensor2(values.back());
}

}  // namespace swp
