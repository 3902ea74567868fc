#pragma once

#include <string>

#include "limd/nn/net.hpp"

namespace limd::nn {

// Checkpoint file: magic "LIMDCKP1", u32 version, u8 tag length + variant
// tag, u32 tensor count, then per tensor a u8-length name, u32 element
// count and raw little-endian float32 payload, in for_each_param order.
void save_checkpoint(const std::string& path, Network<float>& net);

// Loads a checkpoint, reconstructing the variant from the stored tag, and
// records the file digest for bitstream binding.
Network<float> load_checkpoint(const std::string& path);

uint64_t file_digest(const std::string& path);

}  // namespace limd::nn
