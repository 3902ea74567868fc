#include <doctest.h>

#include <cmath>
#include <random>

#include "limd/features.hpp"

using namespace limd;

namespace {

ReconBuffer coded_picture(int w, int h, const std::function<uint8_t(int, int)>& fill) {
    ReconBuffer rb(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) rb.set_sample(x, y, fill(x, y));
    for (int y = 0; y < h; y += 4)
        for (int x = 0; x < w; x += 4) rb.mark_coded({x, y, 4, 4}, 0);
    return rb;
}

}  // namespace

TEST_CASE("gradient_histogram: constant template has no mass") {
    const ReconBuffer rb = coded_picture(32, 32, [](int, int) { return 90; });
    const auto hist = gradient_histogram(rb, {16, 16, 8, 8});
    for (double v : hist) CHECK(v == 0.0);
}

TEST_CASE("gradient_histogram: vertical step edge lands in the horizontal-direction bin") {
    // gradient points along x => bin 18
    const ReconBuffer rb = coded_picture(32, 32, [](int x, int) { return x < 12 ? 0 : 255; });
    const auto hist = gradient_histogram(rb, {16, 16, 8, 8});
    double total = 0;
    for (double v : hist) total += v;
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hist[18] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hist[0] == 0.0);
    CHECK(hist[1] == 0.0);
}

TEST_CASE("gradient_histogram: horizontal step edge lands in the vertical-direction bin") {
    const ReconBuffer rb = coded_picture(32, 32, [](int, int y) { return y < 12 ? 10 : 200; });
    const auto hist = gradient_histogram(rb, {16, 16, 8, 8});
    CHECK(hist[50] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gradient_histogram: nonzero mass normalizes to one") {
    std::mt19937 rng(4);
    const ReconBuffer rb = coded_picture(64, 64, [&](int, int) { return uint8_t(rng() & 0xff); });
    const auto hist = gradient_histogram(rb, {32, 32, 16, 16});
    double total = 0;
    for (double v : hist) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hist[0] == 0.0);
    CHECK(hist[1] == 0.0);
}

TEST_CASE("neighbor_modes: picture origin defaults to planar") {
    ReconBuffer rb(16, 16);
    const auto modes = neighbor_modes(rb, {0, 0, 8, 8});
    for (int m : modes) CHECK(m == 0);
}

TEST_CASE("neighbor_modes: coded neighborhood reports the selected modes") {
    ReconBuffer rb(32, 32);
    for (int y = 0; y < 32; y += 8)
        for (int x = 0; x < 32; x += 8) rb.mark_coded({x, y, 8, 8}, 50);
    const auto modes = neighbor_modes(rb, {8, 8, 8, 8});
    for (int m : modes) CHECK(m == 50);
}

TEST_CASE("neighbor_modes: mixed map") {
    ReconBuffer rb(32, 32);
    rb.mark_coded({8, 0, 8, 8}, 18);  // only the block above is coded
    const auto modes = neighbor_modes(rb, {8, 8, 8, 8});
    CHECK(modes[0] == 0);   // UL
    CHECK(modes[1] == 18);  // U probes (12, 7)
    CHECK(modes[2] == 0);   // UR probes (16, 7), uncoded
    CHECK(modes[3] == 0);
    CHECK(modes[4] == 0);
}

TEST_CASE("build_canvas: 4x4 block layout") {
    ReferenceLines refs(4, 4);
    for (int r = 1; r <= 4; ++r) {
        for (int x = -r; x <= 7; ++x) refs.set_top(r, x, uint8_t(100 + x), true);
        for (int y = -r; y <= 7; ++y) refs.set_left(r, y, uint8_t(10 + y), true);
    }
    const ReferenceCanvas canvas = build_canvas(refs, 4, 4);
    // left segment: 4 real samples bottom-up then the y=0 value replicated
    CHECK(canvas[0] == doctest::Approx(13.0f / 255));
    CHECK(canvas[3] == doctest::Approx(10.0f / 255));
    for (int i = 4; i < 64; ++i) CHECK(canvas[size_t(i)] == doctest::Approx(10.0f / 255));
    // middle: pool window 1 -> verbatim top row
    for (int i = 0; i < 4; ++i) CHECK(canvas[size_t(64 + i)] == doctest::Approx((100.0f + i) / 255));
    // right: extension x in [4,7], then replicated
    for (int i = 0; i < 4; ++i) CHECK(canvas[size_t(68 + i)] == doctest::Approx((104.0f + i) / 255));
    for (int i = 4; i < 64; ++i) CHECK(canvas[size_t(68 + i)] == doctest::Approx(107.0f / 255));
}

TEST_CASE("build_canvas: 64x64 block pools by 16 and needs no padding") {
    ReferenceLines refs(64, 64);
    for (int r = 1; r <= 4; ++r) {
        for (int x = -r; x <= 127; ++x) refs.set_top(r, x, uint8_t(x & 0xff), true);
        for (int y = -r; y <= 127; ++y) refs.set_left(r, y, uint8_t(y & 0xff), true);
    }
    const ReferenceCanvas canvas = build_canvas(refs, 64, 64);
    // left segment holds all 64 real samples
    CHECK(canvas[0] == doctest::Approx(63.0f / 255));
    CHECK(canvas[63] == doctest::Approx(0.0f));
    // middle: mean of x in [0,16) etc.
    CHECK(canvas[64] == doctest::Approx(7.5f / 255));
    CHECK(canvas[67] == doctest::Approx((48 + 7.5f) / 255));
}

TEST_CASE("build_canvas: constant references give a constant canvas") {
    ReferenceLines refs(8, 16);
    for (int r = 1; r <= 4; ++r) {
        for (int x = -r; x <= 15; ++x) refs.set_top(r, x, 128, true);
        for (int y = -r; y <= 31; ++y) refs.set_left(r, y, 128, true);
    }
    const ReferenceCanvas canvas = build_canvas(refs, 8, 16);
    for (float v : canvas) CHECK(v == doctest::Approx(128.0f / 255));
}

TEST_CASE("build_canvas: shape invariance across block sizes") {
    for (int w : {4, 8, 16, 32, 64})
        for (int h : {4, 8, 16, 32, 64}) {
            ReferenceLines refs(w, h);
            const ReferenceCanvas canvas = build_canvas(refs, w, h);
            CHECK(canvas.size() == size_t(kCanvasSize));
        }
}

TEST_CASE("assemble_features: ordering and scaling") {
    std::array<double, kHistBins> hist{};
    std::array<int, kNumNeighborModes> nbrs{};
    auto v = assemble_features(hist, nbrs, 22);
    REQUIRE(v.size() == 73);
    for (int i = 0; i < 72; ++i) CHECK(v[size_t(i)] == 0.0f);
    CHECK(v[72] == doctest::Approx(22.0f / 51));

    nbrs = {66, 33, 0, 1, 50};
    hist[10] = 1.0;
    v = assemble_features(hist, nbrs, 51);
    CHECK(v[10] == 1.0f);
    CHECK(v[67] == doctest::Approx(1.0f));
    CHECK(v[68] == doctest::Approx(0.5f));
    CHECK(v[72] == doctest::Approx(1.0f));
}

TEST_CASE("feature determinism: identical state, identical bits") {
    std::mt19937 rng(9);
    const ReconBuffer rb = coded_picture(32, 32, [&](int, int) { return uint8_t(rng() & 0xff); });
    const Rect r{16, 8, 8, 16};
    const auto h1 = gradient_histogram(rb, r);
    const auto h2 = gradient_histogram(rb, r);
    CHECK(h1 == h2);
    const auto f1 = assemble_features(h1, neighbor_modes(rb, r), 37);
    const auto f2 = assemble_features(h2, neighbor_modes(rb, r), 37);
    CHECK(f1 == f2);
}
