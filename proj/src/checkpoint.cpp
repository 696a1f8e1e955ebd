#include "swp/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace swp {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'P', 'C'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const FsNetwork& net) {
  detail::ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  const ArchSpec& s = net.spec();
  w.u8(static_cast<std::uint8_t>(s.arch));
  w.u8(s.shared_skeleton ? 1 : 0);
  for (std::size_t v : {s.in_channels, s.in_height, s.in_width, s.classes, s.width1, s.width2})
    w.u32(static_cast<std::uint32_t>(v));
  for (const auto& conv : net.convs()) {
    w.f64s(conv.weight.data());
    w.f64s(conv.skeleton.values());
    for (auto f : conv.skeleton.frozen_mask()) w.u8(f);
  }
  for (const auto& bn : net.bns()) {
    w.f64s(bn.gamma);
    w.f64s(bn.beta);
    w.f64s(bn.running_mean);
    w.f64s(bn.running_var);
  }
  for (const auto& lin : net.linears()) {
    w.f64s(lin.weight);
    w.f64s(lin.bias);
  }
  w.crc_from(0);
  return w.take();
}

FsNetwork deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  for (char c : kMagic)
    if (r.u8("magic") != static_cast<std::uint8_t>(c)) throw FormatError("bad magic (not an SWPC checkpoint)", 0);
  if (r.u16("version") != kVersion) throw FormatError("unsupported checkpoint version", 4);
  ArchSpec s;
  const std::uint8_t arch = r.u8("arch");
  if (arch > 1) throw FormatError("unknown architecture tag", 6);
  s.arch = static_cast<Arch>(arch);
  s.shared_skeleton = r.u8("arch") != 0;
  std::size_t* dims[] = {&s.in_channels, &s.in_height, &s.in_width, &s.classes, &s.width1, &s.width2};
  for (auto* d : dims) {
    *d = r.u32("arch");
    if (*d == 0 || *d > 4096) throw FormatError("implausible architecture dimension", r.offset() - 4);
  }
  FsNetwork net = FsNetwork::build(s, 0);
  for (auto& conv : net.convs()) {
    conv.weight = Tensor4(conv.weight.shape(), r.f64s(conv.weight.size(), "conv weights"));
    auto values = r.f64s(conv.skeleton.values().size(), "skeleton");
    std::vector<std::uint8_t> frozen(values.size());
    for (auto& f : frozen) f = r.u8("skeleton mask");
    try {
      conv.skeleton.assign(std::move(values), std::move(frozen));
    } catch (const ShapeError& e) {
      throw FormatError(e.what(), r.offset());
    }
  }
  for (auto& bn : net.bns()) {
    const std::size_t c = bn.channels();
    bn.gamma = r.f64s(c, "batchnorm");
    bn.beta = r.f64s(c, "batchnorm");
    bn.running_mean = r.f64s(c, "batchnorm");
    bn.running_var = r.f64s(c, "batchnorm");
  }
  for (auto& lin : net.linears()) {
    lin.weight = r.f64s(lin.weight.size(), "linear");
    lin.bias = r.f64s(lin.bias.size(), "linear");
  }
  r.check_crc(0);
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
  return net;
}

void save_checkpoint(const FsNetwork& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FsNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace swp
