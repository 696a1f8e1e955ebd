#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "swp/network.hpp"

namespace swp {

/// Full-precision training state of an FS network (weights, skeletons with
/// their frozen masks, batch-norm statistics, linear head).
std::vector<std::uint8_t> serialize_checkpoint(const FsNetwork& net);
FsNetwork deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const FsNetwork& net, const std::filesystem::path& path);
FsNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace swp
