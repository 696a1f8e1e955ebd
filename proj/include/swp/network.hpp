#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "swp/fs_conv.hpp"
#include "swp/layers.hpp"

namespace swp {

enum class Arch { tiny_vgg, tiny_resnet };

const char* to_string(Arch a);
Arch parse_arch(const std::string& s);

struct ArchSpec {
  Arch arch = Arch::tiny_vgg;
  std::size_t in_channels = 1, in_height = 28, in_width = 28;
  std::size_t classes = 10;
  std::size_t width1 = 32, width2 = 64;
  bool shared_skeleton = false;  // group-wise mode

  bool operator==(const ArchSpec&) const = default;
};

enum class NodeKind : std::uint8_t { conv, batchnorm, relu, maxpool2, global_avgpool, linear, add };

/// Register index of the network input.
inline constexpr int kNetworkInput = -1;

/// One op of the network graph. Node k reads registers `input` (and
/// `input2` for add) and writes register k; `param` indexes the matching
/// conv/batchnorm/linear parameter list.
struct Node {
  NodeKind kind;
  int input = kNetworkInput;
  int input2 = kNetworkInput;
  std::size_t param = 0;
  std::string name;
};

struct NetworkGrads {
  std::vector<LayerGrads> conv;  // dX omitted
  std::vector<BatchNormGrads> bn;
  std::vector<LinearGrads> linear;
};

/// A network of FS conv layers with auxiliary layers, trained jointly on
/// weights and skeletons.
class FsNetwork {
 public:
  /// Builds the architecture with fan-in-scaled random weights and all-ones skeletons.
  static FsNetwork build(const ArchSpec& spec, std::uint64_t seed);

  const ArchSpec& spec() const noexcept { return spec_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<FsConvLayer>& convs() noexcept { return convs_; }
  const std::vector<FsConvLayer>& convs() const noexcept { return convs_; }
  std::vector<BatchNorm>& bns() noexcept { return bns_; }
  const std::vector<BatchNorm>& bns() const noexcept { return bns_; }
  std::vector<Linear>& linears() noexcept { return linears_; }
  const std::vector<Linear>& linears() const noexcept { return linears_; }
  /// Name of the node that owns conv layer `param`.
  std::string conv_name(std::size_t param) const;

  /// Training-mode forward: batch statistics, running stats updated, activations cached.
  Tensor2 forward_train(const Tensor4& x);
  /// Backward through the last forward_train call.
  NetworkGrads backward(const Tensor2& dlogits);
  /// Eval-mode forward with running statistics; does not touch the cache.
  Tensor2 predict(const Tensor4& x) const;

 private:
  struct Cache {
    std::vector<Tensor4> values;
    std::vector<BatchNormCache> bn;
    std::vector<std::vector<std::size_t>> argmax;
    Shape4 input_shape;
    Tensor4 input_copy;
  };

  void add_node(NodeKind kind, int input, std::string name, int input2 = kNetworkInput);
  int conv_bn(int input, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride, const std::string& prefix, bool relu);

  ArchSpec spec_;
  std::vector<Node> nodes_;
  std::vector<FsConvLayer> convs_;
  std::vector<BatchNorm> bns_;
  std::vector<Linear> linears_;
  Cache cache_;
};

Tensor4 to_tensor4(const Tensor2& t);
Tensor2 to_tensor2(const Tensor4& t);

}  // namespace swp
