#pragma once

#include <array>
#include <vector>

#include "limd/frame.hpp"
#include "limd/signaling.hpp"

namespace limd {

// Mode-signaling bit saving from baseline vs current bits-per-mode, percent.
double eta_prime(double alpha, double alphaPrime);

// Area-weighted derivation take-up over a full-frame trace, percent.
double omega(const std::vector<TraceEntry>& trace);

struct AccuracyReport {
    // P(delta) percent for delta in {0, 1, 3, 5}
    std::array<double, 4> p{};
    static constexpr std::array<int, 4> deltas{0, 1, 3, 5};
    std::vector<std::vector<size_t>> confusion;  // [truth][predicted], 67x67
};

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels, int delta);
AccuracyReport accuracy_report(const std::vector<int>& predictions, const std::vector<int>& labels);

struct RdPoint {
    double rate = 0;  // any consistent rate unit, > 0
    double psnr = 0;
};

// Classical cubic-fit rate difference between two curves (>= 4 points each),
// percent; negative means the test curve spends fewer bits.
double bd_rate(std::vector<RdPoint> anchor, std::vector<RdPoint> test);

// Mean timing ratio test/anchor across the QP set.
double complexity_ratio(const std::vector<double>& anchorTimes, const std::vector<double>& testTimes);

double psnr(const Frame& reference, const Frame& test);

}  // namespace limd
