#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "limd/frame.hpp"

namespace limd {

// Intra modes: 0 = Planar, 1 = DC, 2..66 angular.
inline constexpr int kNumIntraModes = 67;
inline constexpr int kPlanarMode = 0;
inline constexpr int kDcMode = 1;
inline constexpr int kHorizontalMode = 18;
inline constexpr int kVerticalMode = 50;

bool is_angular(int mode);

// Displacement per row/column in 1/32 sample units for mode 2..66.
// Horizontal family (< 34) projects onto the left column, vertical family
// (>= 34) onto the top row. WAIP remapping is not applied; every shape uses
// the same 65 directions.
int intra_pred_angle(int mode);

// Undirected texture direction of an angular mode, radians in [0, pi),
// measured in image coordinates (x right, y down). Shared by the prediction
// geometry and the gradient-histogram binning.
double mode_direction(int mode);

// Four L-shaped reference lines around a block. Line r covers the top row
// x in [-r, 2w-1] at y = -r and the left column y in [-r, 2h-1] at x = -r.
// Unavailable samples are substituted (scan from the bottom-left end of the L
// to the top-right end, propagating the nearest earlier available value; a
// fully unavailable line becomes mid-gray 128) and their flags stay false.
class ReferenceLines {
public:
    static constexpr int kNumLines = 4;

    ReferenceLines() = default;
    ReferenceLines(int blockW, int blockH);

    int block_w() const { return w_; }
    int block_h() const { return h_; }

    // line in [1,4]; x in [-line, 2w-1] / y in [-line, 2h-1]
    uint8_t top(int line, int x) const { return topVals_[line - 1][size_t(x + line)]; }
    uint8_t left(int line, int y) const { return leftVals_[line - 1][size_t(y + line)]; }
    bool top_available(int line, int x) const { return topAvail_[line - 1][size_t(x + line)] != 0; }
    bool left_available(int line, int y) const { return leftAvail_[line - 1][size_t(y + line)] != 0; }

    void set_top(int line, int x, uint8_t v, bool avail);
    void set_left(int line, int y, uint8_t v, bool avail);

private:
    int w_ = 0, h_ = 0;
    std::array<std::vector<uint8_t>, kNumLines> topVals_, leftVals_;
    std::array<std::vector<uint8_t>, kNumLines> topAvail_, leftAvail_;
};

// Pulls reference samples for `rect` out of the reconstruction state,
// applying the substitution rule. `source` overrides the sample fetch (used
// for the source-side feature switch); availability always follows the
// recon coded flags.
ReferenceLines build_reference(const ReconBuffer& recon, const Rect& rect, const Frame* source = nullptr);

// 67-mode prediction from reference line 1. Planar and DC use the classic
// integer blends; angular modes project with 1/32-pel linear interpolation,
// extending the main reference by inverse projection (negative angles) or
// edge replication (beyond 2w/2h). Throws InvalidArgument on a bad mode.
std::vector<uint8_t> predict(int mode, const ReferenceLines& refs, int w, int h);

}  // namespace limd
