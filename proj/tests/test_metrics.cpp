#include <doctest.h>

#include <cmath>
#include <random>

#include "limd/metrics.hpp"

using namespace limd;

TEST_CASE("eta_prime: reference cross-check") {
    CHECK(std::abs(eta_prime(2.18, 1.02) - 53.2) < 0.1);
    CHECK(eta_prime(3.0, 3.0) == 0.0);
    CHECK(eta_prime(3.0, 1.5) == doctest::Approx(50.0));
    CHECK_THROWS_AS(eta_prime(0.0, 1.0), InvalidArgument);
}

TEST_CASE("omega: boundary and area weighting") {
    std::vector<TraceEntry> t(2);
    t[0] = {0, 0, 8, 8, 0, true, 0, 1, 0, 0, 0};
    t[1] = {8, 0, 8, 8, 0, false, 2, 1, 0, 0, 0};
    CHECK(omega(t) == doctest::Approx(50.0));
    t[1].usedDlimd = true;
    CHECK(omega(t) == doctest::Approx(100.0));
    t[0].usedDlimd = t[1].usedDlimd = false;
    CHECK(omega(t) == doctest::Approx(0.0));
    // area weighting: one 16x16 selected vs one 8x8 unselected
    std::vector<TraceEntry> u(2);
    u[0] = {0, 0, 16, 16, 0, true, 0, 1, 0, 0, 0};
    u[1] = {16, 0, 8, 8, 0, false, 2, 1, 0, 0, 0};
    CHECK(omega(u) == doctest::Approx(100.0 * 256.0 / 320.0));
    CHECK_THROWS_AS(omega({}), EmptyInput);
}

TEST_CASE("accuracy: delta thresholds") {
    CHECK(accuracy({4}, {4}, 0) == 100.0);
    CHECK(accuracy({5}, {4}, 0) == 0.0);
    CHECK(accuracy({5}, {4}, 1) == 100.0);
    CHECK(accuracy({1, 9, 30}, {1, 5, 30}, 0) == doctest::Approx(100.0 * 2 / 3));
    CHECK_THROWS_AS(accuracy({1}, {1, 2}, 0), InvalidArgument);
}

TEST_CASE("accuracy: monotone in delta and confusion sums") {
    std::mt19937 rng(3);
    std::vector<int> pred, truth;
    for (int i = 0; i < 500; ++i) {
        truth.push_back(int(rng() % 67));
        pred.push_back(std::min(66, std::max(0, truth.back() + int(rng() % 7) - 3)));
    }
    const AccuracyReport r = accuracy_report(pred, truth);
    for (size_t i = 1; i < r.p.size(); ++i) CHECK(r.p[i] >= r.p[i - 1]);
    size_t total = 0;
    for (const auto& row : r.confusion)
        for (size_t v : row) total += v;
    CHECK(total == truth.size());
    // row sums equal per-class label counts
    std::vector<size_t> perClass(67, 0);
    for (int t : truth) perClass[size_t(t)] += 1;
    for (int c = 0; c < 67; ++c) {
        size_t row = 0;
        for (size_t v : r.confusion[size_t(c)]) row += v;
        CHECK(row == perClass[size_t(c)]);
    }
}

TEST_CASE("bd_rate: identical curves and uniform shift") {
    std::vector<RdPoint> a = {{1000, 30}, {2000, 33}, {4000, 36}, {8000, 39}};
    CHECK(std::abs(bd_rate(a, a)) < 1e-9);

    std::vector<RdPoint> shifted;
    for (const RdPoint& p : a) shifted.push_back({p.rate * 0.9, p.psnr});
    CHECK(bd_rate(a, shifted) == doctest::Approx(-10.0).epsilon(0.005));
}

TEST_CASE("bd_rate: closed-form synthetic curves") {
    // both curves exactly cubic in psnr: log10(rate) = c0 + c1 d + c2 d^2 + c3 d^3,
    // the test curve offset by a known constant -> analytic rate delta
    auto curve = [](double off) {
        std::vector<RdPoint> pts;
        for (double d : {30.0, 32.0, 34.0, 36.0, 38.0}) {
            const double t = d - 34.0;
            const double lr = 3.0 + 0.08 * t + 0.002 * t * t + 0.0005 * t * t * t + off;
            pts.push_back({std::pow(10.0, lr), d});
        }
        return pts;
    };
    const double off = -0.0223;  // log10 ratio
    const double expected = (std::pow(10.0, off) - 1.0) * 100.0;
    CHECK(bd_rate(curve(0.0), curve(off)) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("bd_rate: domain errors") {
    std::vector<RdPoint> three = {{1, 30}, {2, 33}, {3, 36}};
    CHECK_THROWS_AS(bd_rate(three, three), InvalidArgument);
    std::vector<RdPoint> a = {{1000, 30}, {2000, 33}, {4000, 36}, {8000, 39}};
    std::vector<RdPoint> disjoint = {{1000, 50}, {2000, 53}, {4000, 56}, {8000, 59}};
    CHECK_THROWS_AS(bd_rate(a, disjoint), InvalidArgument);
    std::vector<RdPoint> bad = {{0, 30}, {2000, 33}, {4000, 36}, {8000, 39}};
    CHECK_THROWS_AS(bd_rate(bad, a), InvalidArgument);
}

TEST_CASE("complexity_ratio") {
    CHECK(complexity_ratio({1, 1, 1, 1}, {1, 1, 1, 1}) == doctest::Approx(1.0));
    CHECK(complexity_ratio({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(2.0));
    CHECK(complexity_ratio({1, 1, 1, 1}, {1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK_THROWS_AS(complexity_ratio({0, 1, 1, 1}, {1, 1, 1, 1}), InvalidArgument);
    CHECK_THROWS_AS(complexity_ratio({1, 1}, {1}), InvalidArgument);
}

TEST_CASE("psnr") {
    Frame a, b;
    a.width = b.width = 4;
    a.height = b.height = 4;
    a.samples.assign(16, 100);
    b.samples.assign(16, 100);
    CHECK(psnr(a, b) == doctest::Approx(99.999));
    b.samples[0] = 110;
    const double mse = 100.0 / 16.0;
    CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(255.0 * 255.0 / mse)));
}
