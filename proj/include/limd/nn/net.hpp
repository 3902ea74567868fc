#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "limd/common.hpp"
#include "limd/features.hpp"
#include "limd/nn/parallel.hpp"
#include "limd/nn/plane.hpp"

namespace limd::nn {

inline constexpr int kNumClasses = 67;

enum class FlnKind { Parallel, Serial, None };
enum class F0Mode { EveryLayer, FirstLayer, None };

// Architecture knobs behind the named variants. The canonical presets:
//   dlimd            parallel branches, handcrafted vector into every FC layer
//   dlimd-l          reduced widths (16 feature maps, 128-node hidden layers)
//   ablation-h       handcrafted features only (no feature-learning network)
//   ablation-l       learned features only (no handcrafted vector)
//   ablation-hl-first  handcrafted vector without the gradient histogram
//   serial           serial feature-learning stack, handcrafted vector into
//                    the first FC layer only
struct VariantConfig {
    std::string tag;
    FlnKind fln = FlnKind::Parallel;
    F0Mode f0mode = F0Mode::EveryLayer;
    int f0Dim = kHandcraftedDim;  // 73, or 6 when the histogram is dropped
    int conv5Out = 64;
    int hidden = 2048;

    static VariantConfig named(std::string_view tag);

    int flatten_dim() const { return fln == FlnKind::None ? 0 : kMapH * kMapW * conv5Out; }
    int fc_input(int layer) const;  // layer in [0,4]
    int fc_output(int layer) const { return layer == 4 ? kNumClasses : hidden; }
};

template <typename T>
struct ConvParam {
    std::string name;
    int k = 3, cin = 0, cout = 0;
    std::vector<T> w;   // [co][ci][k*k]
    std::vector<T> b;   // [co]
    std::vector<T> wT;  // transposed+rotated for backward_data, refreshed after updates
};

template <typename T>
struct DenseParam {
    std::string name;
    int in = 0, out = 0;
    std::vector<T> w;  // [o][i]
    std::vector<T> b;
};

// Gradient buffers, ordered to match Network::for_each_param. Conv weight
// gradients use the transposed [ci][k*k][co] layout the kernels emit.
template <typename T>
struct Gradients {
    std::vector<std::vector<T>> tensors;
    void zero() {
        for (auto& t : tensors) std::fill(t.begin(), t.end(), T(0));
    }
    void add_scaled(const Gradients& other, T scale) {
        for (size_t i = 0; i < tensors.size(); ++i)
            for (size_t j = 0; j < tensors[i].size(); ++j) tensors[i][j] += scale * other.tensors[i][j];
    }
};

// Per-call scratch: activation planes, FC buffers, dropout masks. One
// instance per thread; reused across samples.
template <typename T>
struct Workspace {
    std::vector<PlaneBuf<T>> act;    // conv stage outputs, act[0] = input
    std::vector<PlaneBuf<T>> dact;
    std::vector<T> flat, dflat;
    std::array<std::vector<T>, 5> fcIn, dfcIn;
    std::array<std::vector<T>, 5> fcOut, dfcOut;
    std::array<std::vector<uint8_t>, 4> dropMask;
    bool dropActive = false;    // whether the last forward ran with dropout
    AlignedBuf<T> dyT, dyT2;    // transpose scratch for weight gradients
    std::vector<T> dxScratch;   // second-thread partial for dense backward
};

struct DropoutPlan {
    bool enabled = false;
    uint64_t seed = 0;  // per-sample stream
    static constexpr float kKeep = 0.5f;
};

template <typename T>
class Network {
public:
    explicit Network(const VariantConfig& cfg);

    const VariantConfig& config() const { return cfg_; }

    void init_weights(uint64_t seed);
    void make_workspace(Workspace<T>& ws) const;
    Gradients<T> make_gradients() const;

    // Runs the forward pass; probabilities land in ws.fcOut[4] (67 entries).
    // canvas is the row-major 4x132 normalized matrix, f0 the full 73-entry
    // handcrafted vector (the variant selects what it consumes). When a pool
    // is supplied, layers are sliced across its threads (deterministically
    // for a fixed thread count).
    void forward(const float* canvas, const float* f0, Workspace<T>& ws, const DropoutPlan& drop,
                 ParallelPool* pool = nullptr) const;

    // Cross-entropy backward from the softmax output for a one-hot label;
    // accumulates scaled gradients. forward() must have run on this ws.
    void backward(int label, T scale, Workspace<T>& ws, Gradients<T>& grads,
                  ParallelPool* pool = nullptr) const;

    // Rebuilds the transposed conv weights; call after every parameter update.
    void refresh_transposed();

    void for_each_param(const std::function<void(const std::string&, std::vector<T>&, bool isConvWeight,
                                                 int cin, int k, int cout)>& fn);

    size_t param_count() const;

    std::vector<ConvParam<T>> convs;   // parallel: 1a,1b,2a,2b,3a,3b,4,5; serial: 1..5
    std::vector<DenseParam<T>> fcs;    // always 5
    uint64_t sourceDigest = 0;

private:
    VariantConfig cfg_;
    void forward_fln(Workspace<T>& ws, ParallelPool* pool) const;
    void backward_fln(Workspace<T>& ws, Gradients<T>& grads, ParallelPool* pool) const;
    void fill_f0(const float* f0, T* dst) const;
};

// Softmax-layer cross entropy with the documented 1e-12 clamp.
template <typename T>
T cross_entropy(const T* probs, int n, int label);

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace limd::nn
