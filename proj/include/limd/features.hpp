#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "limd/frame.hpp"
#include "limd/intra.hpp"

namespace limd {

inline constexpr int kHistBins = 67;
inline constexpr int kNumNeighborModes = 5;
inline constexpr int kHandcraftedDim = kHistBins + kNumNeighborModes + 1;  // 73
inline constexpr int kCanvasRows = 4;
inline constexpr int kCanvasCols = 64 + 4 + 64;  // 132 for every block size
inline constexpr int kCanvasSize = kCanvasRows * kCanvasCols;

// Gradient histogram + neighbor modes + QP before flattening.
struct HandcraftedVector {
    std::array<double, kHistBins> hist{};         // L1-normalized, bins 0/1 stay 0
    std::array<int, kNumNeighborModes> nbrModes{};  // UL, U, UR, L, BL
    int qp = 0;
};

// Fixed-size normalized input to the feature-learning network, row-major
// 4 x 132, values in [0,1].
using ReferenceCanvas = std::array<float, kCanvasSize>;

// 67-bin directional histogram over the 4-line reconstructed L template:
// 3x3 Sobel runs at every template sample whose full support is coded, the
// gradient direction is folded to [0,pi) and voted (|Gx|+|Gy|) into the
// nearest angular mode's bin. `source` switches the sample fetch (the
// availability test still follows the coded map).
std::array<double, kHistBins> gradient_histogram(const ReconBuffer& recon, const Rect& rect,
                                                 const Frame* source = nullptr);

// Final selected modes of the UL / U / UR / L / BL neighbor blocks, Planar
// when off-picture or not yet coded.
std::array<int, kNumNeighborModes> neighbor_modes(const ReconBuffer& recon, const Rect& rect);

// Unfolds the four reference lines into the fixed 4x132 canvas:
// [left column bottom-up, replicated to 64 | top row pooled to 4 |
//  top extension, replicated to 64], divided by 255.
ReferenceCanvas build_canvas(const ReferenceLines& refs, int w, int h);

// Flat 73-entry vector: hist[0..66], neighbor modes / 66, qp / 51.
std::array<float, kHandcraftedDim> assemble_features(const std::array<double, kHistBins>& hist,
                                                     const std::array<int, kNumNeighborModes>& nbrModes, int qp);

}  // namespace limd
