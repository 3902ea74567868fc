#include "limd/features.hpp"

#include <algorithm>
#include <cmath>

namespace limd {

namespace {

// Mode line angles in [0, pi), indexed 0..64 for modes 2..66.
const std::array<double, 65>& mode_angles() {
    static const std::array<double, 65> table = [] {
        std::array<double, 65> t{};
        for (int m = 2; m <= 66; ++m) t[size_t(m - 2)] = mode_direction(m);
        return t;
    }();
    return table;
}

int nearest_mode_for_gradient(int gx, int gy) {
    double ang = std::atan2(double(gy), double(gx));
    if (ang < 0) ang += M_PI;
    if (ang >= M_PI) ang -= M_PI;
    const auto& angles = mode_angles();
    int best = 2;
    double bestDist = 1e9;
    for (int m = 2; m <= 66; ++m) {
        double d = std::fabs(ang - angles[size_t(m - 2)]);
        d = std::min(d, M_PI - d);
        if (d < bestDist - 1e-15) {
            bestDist = d;
            best = m;
        }
    }
    return best;
}

}  // namespace

std::array<double, kHistBins> gradient_histogram(const ReconBuffer& recon, const Rect& rect,
                                                 const Frame* source) {
    std::array<double, kHistBins> hist{};
    auto fetch = [&](int x, int y) -> int { return source ? source->at(x, y) : recon.sample(x, y); };
    auto supported = [&](int x, int y) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (!recon.coded(x + dx, y + dy)) return false;
        return true;
    };

    auto vote = [&](int x, int y) {
        if (!supported(x, y)) return;
        // 3x3 Sobel, x kernel [-1 0 1; -2 0 2; -1 0 1], y kernel transposed.
        const int a = fetch(x - 1, y - 1), b = fetch(x, y - 1), c = fetch(x + 1, y - 1);
        const int d = fetch(x - 1, y), f = fetch(x + 1, y);
        const int g = fetch(x - 1, y + 1), h = fetch(x, y + 1), i = fetch(x + 1, y + 1);
        const int gx = (c + 2 * f + i) - (a + 2 * d + g);
        const int gy = (g + 2 * h + i) - (a + 2 * b + c);
        if (gx == 0 && gy == 0) return;
        hist[size_t(nearest_mode_for_gradient(gx, gy))] += double(std::abs(gx) + std::abs(gy));
    };

    // Top rows of the L template, then the left columns.
    for (int y = rect.y - 4; y <= rect.y - 1; ++y)
        for (int x = rect.x - 4; x <= rect.x + 2 * rect.w - 1; ++x) vote(x, y);
    for (int y = rect.y; y <= rect.y + 2 * rect.h - 1; ++y)
        for (int x = rect.x - 4; x <= rect.x - 1; ++x) vote(x, y);

    double total = 0;
    for (double v : hist) total += v;
    if (total > 0)
        for (double& v : hist) v /= total;
    return hist;
}

std::array<int, kNumNeighborModes> neighbor_modes(const ReconBuffer& recon, const Rect& rect) {
    const int x = rect.x, y = rect.y, w = rect.w, h = rect.h;
    const std::array<std::pair<int, int>, kNumNeighborModes> probes = {{
        {x - 1, y - 1},      // UL
        {x + w / 2, y - 1},  // U
        {x + w, y - 1},      // UR
        {x - 1, y + h / 2},  // L
        {x - 1, y + h},      // BL
    }};
    std::array<int, kNumNeighborModes> out{};
    for (size_t i = 0; i < probes.size(); ++i) {
        const auto [px, py] = probes[i];
        out[i] = recon.coded(px, py) ? recon.mode_at(px, py) : kPlanarMode;
    }
    return out;
}

ReferenceCanvas build_canvas(const ReferenceLines& refs, int w, int h) {
    ReferenceCanvas canvas{};
    for (int r = 1; r <= kCanvasRows; ++r) {
        float* row = canvas.data() + size_t(r - 1) * kCanvasCols;
        int col = 0;
        // Left segment: left column bottom-up, then replicate to 64 entries.
        for (int i = 0; i < 64; ++i) {
            const int y = i < h ? (h - 1 - i) : 0;
            row[col++] = float(refs.left(r, y)) / 255.0f;
        }
        // Middle segment: top row average-pooled to 4 entries.
        const int win = w / 4;
        for (int i = 0; i < 4; ++i) {
            double acc = 0;
            for (int j = 0; j < win; ++j) acc += refs.top(r, i * win + j);
            row[col++] = float(acc / win / 255.0);
        }
        // Right segment: top extension x in [w, 2w-1], replicated to 64.
        for (int i = 0; i < 64; ++i) {
            const int x = w + std::min(i, w - 1);
            row[col++] = float(refs.top(r, x)) / 255.0f;
        }
    }
    return canvas;
}

std::array<float, kHandcraftedDim> assemble_features(const std::array<double, kHistBins>& hist,
                                                     const std::array<int, kNumNeighborModes>& nbrModes,
                                                     int qp) {
    std::array<float, kHandcraftedDim> out{};
    for (int i = 0; i < kHistBins; ++i) out[size_t(i)] = float(hist[size_t(i)]);
    for (int i = 0; i < kNumNeighborModes; ++i)
        out[size_t(kHistBins + i)] = float(nbrModes[size_t(i)]) / 66.0f;
    out[kHandcraftedDim - 1] = float(qp) / 51.0f;
    return out;
}

}  // namespace limd
