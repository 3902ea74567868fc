#include "limd/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace limd {

double eta_prime(double alpha, double alphaPrime) {
    if (alpha <= 0) throw InvalidArgument("alpha must be positive");
    return (alpha - alphaPrime) / alpha * 100.0;
}

double omega(const std::vector<TraceEntry>& trace) {
    if (trace.empty()) throw EmptyInput("empty trace");
    double selected = 0, total = 0;
    for (const TraceEntry& e : trace) {
        const double area = double(e.w) * e.h;
        total += area;
        if (e.usedDlimd) selected += area;
    }
    return selected / total * 100.0;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels, int delta) {
    if (predictions.size() != labels.size()) throw InvalidArgument("prediction/label length mismatch");
    if (predictions.empty()) throw EmptyInput("empty evaluation set");
    size_t hit = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (std::abs(predictions[i] - labels[i]) <= delta) ++hit;
    return 100.0 * double(hit) / double(predictions.size());
}

AccuracyReport accuracy_report(const std::vector<int>& predictions, const std::vector<int>& labels) {
    AccuracyReport r;
    for (size_t i = 0; i < r.deltas.size(); ++i) r.p[i] = accuracy(predictions, labels, r.deltas[i]);
    r.confusion.assign(67, std::vector<size_t>(67, 0));
    for (size_t i = 0; i < predictions.size(); ++i)
        r.confusion[size_t(labels[i])][size_t(predictions[i])] += 1;
    return r;
}

namespace {

// Least-squares cubic fit of y over x (x shifted by its mean for
// conditioning); returns coefficients of 1, x, x^2, x^3 about the shift.
struct Cubic {
    double shift = 0;
    std::array<double, 4> c{};

    double integral(double a, double b) const {
        auto anti = [&](double x) {
            const double t = x - shift;
            return c[0] * t + c[1] * t * t / 2 + c[2] * t * t * t / 3 + c[3] * t * t * t * t / 4;
        };
        return anti(b) - anti(a);
    }
};

Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    Cubic fit;
    for (double v : x) fit.shift += v;
    fit.shift /= double(n);

    double m[4][5] = {};
    for (size_t i = 0; i < n; ++i) {
        const double t = x[i] - fit.shift;
        double pw[4] = {1, t, t * t, t * t * t};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) m[r][c] += pw[r] * pw[c];
            m[r][4] += pw[r] * y[i];
        }
    }
    // gaussian elimination with partial pivoting
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        std::swap(m[col], m[pivot]);
        if (std::abs(m[col][col]) < 1e-12) throw InvalidArgument("degenerate rate-distortion curve");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int i = 0; i < 4; ++i) fit.c[size_t(i)] = m[i][4] / m[i][i];
    return fit;
}

}  // namespace

double bd_rate(std::vector<RdPoint> anchor, std::vector<RdPoint> test) {
    if (anchor.size() < 4 || test.size() < 4) throw InvalidArgument("bd_rate needs >= 4 points per curve");
    for (const auto* curve : {&anchor, &test})
        for (const RdPoint& p : *curve) {
            if (p.rate <= 0) throw InvalidArgument("rates must be positive");
            if (!std::isfinite(p.psnr)) throw InvalidArgument("psnr must be finite");
        }
    auto byPsnr = [](const RdPoint& a, const RdPoint& b) { return a.psnr < b.psnr; };
    std::sort(anchor.begin(), anchor.end(), byPsnr);
    std::sort(test.begin(), test.end(), byPsnr);

    auto split = [](const std::vector<RdPoint>& c, std::vector<double>& xs, std::vector<double>& ys) {
        for (const RdPoint& p : c) {
            xs.push_back(p.psnr);
            ys.push_back(std::log10(p.rate));
        }
    };
    std::vector<double> ax, ay, tx, ty;
    split(anchor, ax, ay);
    split(test, tx, ty);

    const double lo = std::max(ax.front(), tx.front());
    const double hi = std::min(ax.back(), tx.back());
    if (!(hi > lo)) throw InvalidArgument("rate-distortion curves do not overlap in quality");

    const Cubic fa = fit_cubic(ax, ay);
    const Cubic ft = fit_cubic(tx, ty);
    const double avgDiff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avgDiff) - 1.0) * 100.0;
}

double complexity_ratio(const std::vector<double>& anchorTimes, const std::vector<double>& testTimes) {
    if (anchorTimes.size() != testTimes.size() || anchorTimes.empty())
        throw InvalidArgument("timing vectors must match and be non-empty");
    double sum = 0;
    for (size_t i = 0; i < anchorTimes.size(); ++i) {
        if (anchorTimes[i] <= 0) throw InvalidArgument("anchor time must be positive");
        sum += testTimes[i] / anchorTimes[i];
    }
    return sum / double(anchorTimes.size());
}

double psnr(const Frame& reference, const Frame& test) {
    if (reference.width != test.width || reference.height != test.height)
        throw InvalidArgument("psnr geometry mismatch");
    double sse = 0;
    for (size_t i = 0; i < reference.samples.size(); ++i) {
        const double d = double(reference.samples[i]) - double(test.samples[i]);
        sse += d * d;
    }
    if (sse == 0) return 99.999;
    const double mse = sse / double(reference.samples.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace limd
