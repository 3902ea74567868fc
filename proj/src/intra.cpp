#include "limd/intra.hpp"

#include <algorithm>
#include <cmath>

namespace limd {

bool is_angular(int mode) { return mode >= 2 && mode <= 66; }

namespace {

// VVC 65-direction table: displacement in 1/32 samples for offsets 0..16
// from the pure horizontal/vertical directions, and the matching inverse
// angles (512*32/angle) used to extend the main reference.
constexpr int kAngTable[17] = {0, 1, 2, 3, 4, 6, 8, 10, 12, 14, 16, 18, 20, 23, 26, 29, 32};
constexpr int kInvAngTable[17] = {0,   16384, 8192, 5461, 4096, 2731, 2048, 1638, 1365,
                                  1170, 1024, 910,  819,  712,  630,  565,  512};

int angle_index(int mode) {
    return mode >= 34 ? mode - kVerticalMode : kHorizontalMode - mode;
}

}  // namespace

int intra_pred_angle(int mode) {
    if (!is_angular(mode)) throw InvalidArgument("angular mode expected");
    const int idx = angle_index(mode);
    const int a = kAngTable[std::abs(idx)];
    return idx < 0 ? -a : a;
}

double mode_direction(int mode) {
    const int a = intra_pred_angle(mode);
    // Horizontal family runs along (32, -a), vertical along (a, -32); fold
    // the undirected line into [0, pi).
    double ang = mode < 34 ? std::atan2(double(-a), 32.0) : std::atan2(-32.0, double(a));
    if (ang < 0) ang += M_PI;
    if (ang >= M_PI) ang -= M_PI;
    return ang;
}

ReferenceLines::ReferenceLines(int blockW, int blockH) : w_(blockW), h_(blockH) {
    for (int r = 1; r <= kNumLines; ++r) {
        topVals_[r - 1].assign(size_t(2 * w_ + r), 128);
        leftVals_[r - 1].assign(size_t(2 * h_ + r), 128);
        topAvail_[r - 1].assign(size_t(2 * w_ + r), 0);
        leftAvail_[r - 1].assign(size_t(2 * h_ + r), 0);
    }
}

void ReferenceLines::set_top(int line, int x, uint8_t v, bool avail) {
    topVals_[line - 1][size_t(x + line)] = v;
    topAvail_[line - 1][size_t(x + line)] = avail ? 1 : 0;
}

void ReferenceLines::set_left(int line, int y, uint8_t v, bool avail) {
    leftVals_[line - 1][size_t(y + line)] = v;
    leftAvail_[line - 1][size_t(y + line)] = avail ? 1 : 0;
}

ReferenceLines build_reference(const ReconBuffer& recon, const Rect& rect, const Frame* source) {
    ReferenceLines refs(rect.w, rect.h);
    auto fetch = [&](int px, int py) -> uint8_t {
        return source ? source->at(px, py) : recon.sample(px, py);
    };

    for (int r = 1; r <= ReferenceLines::kNumLines; ++r) {
        // Unfold line r into one scan from the bottom-left end of the L to
        // the top-right end: left column upward, corner, then top row.
        const int leftLen = 2 * rect.h + r;
        const int topLen = 2 * rect.w + r;
        const int total = leftLen + topLen - 1;  // corner shared
        std::vector<int> vals(size_t(total), -1);

        auto position = [&](int i, int& px, int& py) {
            if (i < leftLen) {  // y = 2h-1 down to -r at x = -r
                px = rect.x - r;
                py = rect.y + (2 * rect.h - 1) - i;
            } else {  // x = -r+1 .. 2w-1 at y = -r
                px = rect.x - r + (i - leftLen + 1);
                py = rect.y - r;
            }
        };

        for (int i = 0; i < total; ++i) {
            int px, py;
            position(i, px, py);
            if (recon.coded(px, py)) vals[size_t(i)] = fetch(px, py);
        }

        // Substitution: leading gap takes the first available value, later
        // gaps repeat the last value seen; a fully empty line becomes 128.
        int first = -1;
        for (int i = 0; i < total; ++i)
            if (vals[size_t(i)] >= 0) {
                first = i;
                break;
            }
        std::vector<uint8_t> filled(size_t(total), 128);
        if (first >= 0) {
            int last = vals[size_t(first)];
            for (int i = 0; i < total; ++i) {
                if (vals[size_t(i)] >= 0) last = vals[size_t(i)];
                filled[size_t(i)] = uint8_t(i < first ? vals[size_t(first)] : last);
            }
        }

        for (int i = 0; i < total; ++i) {
            int px, py;
            position(i, px, py);
            const bool avail = vals[size_t(i)] >= 0;
            if (i < leftLen) {
                refs.set_left(r, py - rect.y, filled[size_t(i)], avail);
                if (py - rect.y == -r) refs.set_top(r, px - rect.x, filled[size_t(i)], avail);
            } else {
                refs.set_top(r, px - rect.x, filled[size_t(i)], avail);
            }
        }
    }
    return refs;
}

namespace {

int floor_log2(int v) {
    int r = 0;
    while (v > 1) {
        v >>= 1;
        ++r;
    }
    return r;
}

std::vector<uint8_t> predict_planar(const ReferenceLines& refs, int w, int h) {
    std::vector<uint8_t> out(size_t(w) * h);
    const int lw = floor_log2(w), lh = floor_log2(h);
    const int bottomLeft = refs.left(1, h);
    const int topRight = refs.top(1, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int predV = (h - 1 - y) * refs.top(1, x) + (y + 1) * bottomLeft;
            const int predH = (w - 1 - x) * refs.left(1, y) + (x + 1) * topRight;
            const int v = ((predV << lw) + (predH << lh) + w * h) >> (lw + lh + 1);
            out[size_t(y) * w + x] = uint8_t(v);
        }
    return out;
}

std::vector<uint8_t> predict_dc(const ReferenceLines& refs, int w, int h) {
    int sum = 0;
    for (int x = 0; x < w; ++x) sum += refs.top(1, x);
    for (int y = 0; y < h; ++y) sum += refs.left(1, y);
    const uint8_t dc = uint8_t((sum + ((w + h) >> 1)) / (w + h));
    return std::vector<uint8_t>(size_t(w) * h, dc);
}

// Main/side reference for angular prediction, index -1 is the corner.
// The positive tail beyond the stored 2*len-1 extent replicates the edge;
// the negative extension inverse-projects the side reference.
struct MainRef {
    std::vector<uint8_t> buf;
    int lo;  // smallest valid index
    int hi;  // largest valid index

    int at(int i) const { return buf[size_t(std::clamp(i, lo, hi) - lo)]; }
};

MainRef build_main_ref(const ReferenceLines& refs, int w, int h, bool vertical, int angle) {
    const int mainLen = vertical ? w : h;  // block extent along the main reference
    const int sideLen = vertical ? h : w;
    auto mainSample = [&](int i) { return vertical ? refs.top(1, i) : refs.left(1, i); };

    MainRef m;
    m.lo = angle < 0 ? -(sideLen + 1) : -1;
    m.hi = 2 * mainLen - 1;
    m.buf.resize(size_t(m.hi - m.lo + 1));
    for (int i = -1; i <= m.hi; ++i) m.buf[size_t(i - m.lo)] = mainSample(i);
    return m;
}

}  // namespace

std::vector<uint8_t> predict(int mode, const ReferenceLines& refs, int w, int h) {
    if (mode < 0 || mode >= kNumIntraModes) throw InvalidArgument("intra mode out of range");
    if (mode == kPlanarMode) return predict_planar(refs, w, h);
    if (mode == kDcMode) return predict_dc(refs, w, h);

    const bool vertical = mode >= 34;
    const int idx = angle_index(mode);
    const int angle = intra_pred_angle(mode);

    MainRef main = build_main_ref(refs, w, h, vertical, angle);
    if (angle < 0) {
        const int sideLen = vertical ? h : w;
        const int invAngle = kInvAngTable[std::abs(idx)];
        for (int t = -2; t >= -(sideLen + 1); --t) {
            const int j = std::min(((-t - 1) * invAngle + 256) >> 9, sideLen) - 1;
            main.buf[size_t(t - main.lo)] = uint8_t(vertical ? refs.left(1, j) : refs.top(1, j));
        }
    }

    std::vector<uint8_t> out(size_t(w) * h);
    const int across = vertical ? h : w;  // axis stepping away from the reference
    const int along = vertical ? w : h;
    for (int a = 0; a < across; ++a) {
        const int pos = (a + 1) * angle;
        const int ii = pos >> 5;
        const int frac = pos & 31;
        for (int b = 0; b < along; ++b) {
            const int p0 = main.at(b + ii);
            const int p1 = main.at(b + ii + 1);
            const int v = ((32 - frac) * p0 + frac * p1 + 16) >> 5;
            const int x = vertical ? b : a;
            const int y = vertical ? a : b;
            out[size_t(y) * w + x] = uint8_t(std::clamp(v, 0, 255));
        }
    }
    return out;
}

}  // namespace limd
