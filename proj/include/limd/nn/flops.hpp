#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "limd/nn/net.hpp"

namespace limd::nn {

struct LayerSpec {
    enum class Kind { Conv, Full } kind = Kind::Conv;
    std::string name;
    // conv fields
    int h = kMapH, w = kMapW, cin = 0, k = 0, cout = 0;
    // full fields
    int in = 0, out = 0;
};

// Layer table for a variant, convolutional layers first.
std::vector<LayerSpec> layer_specs(const VariantConfig& cfg);

// Multiply-add counting: conv 2HW(Cin*K^2 + 1)Cout, full (2I - 1)O.
uint64_t flops(const LayerSpec& spec);

}  // namespace limd::nn
