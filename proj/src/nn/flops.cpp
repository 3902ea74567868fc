#include "limd/nn/flops.hpp"

namespace limd::nn {

std::vector<LayerSpec> layer_specs(const VariantConfig& cfg) {
    std::vector<LayerSpec> specs;
    Network<float> net{cfg};
    for (const auto& c : net.convs) {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Conv;
        s.name = c.name;
        s.cin = c.cin;
        s.k = c.k;
        s.cout = c.cout;
        specs.push_back(s);
    }
    for (const auto& d : net.fcs) {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Full;
        s.name = d.name;
        s.in = d.in;
        s.out = d.out;
        specs.push_back(s);
    }
    return specs;
}

uint64_t flops(const LayerSpec& s) {
    if (s.kind == LayerSpec::Kind::Conv)
        return 2ull * s.h * s.w * (uint64_t(s.cin) * s.k * s.k + 1) * s.cout;
    return (2ull * s.in - 1) * s.out;
}

}  // namespace limd::nn
