// Micro-benchmark for the convolution kernels at the shapes that dominate
// training. Reports GFLOP/s per kernel, single thread and all cores.

#include <chrono>
#include <cstdio>
#include <random>
#include <thread>
#include <vector>

#include "limd/nn/kernels.hpp"
#include "limd/nn/plane.hpp"

using namespace limd::nn;

namespace {

double now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Shape {
    const char* name;
    int k, cin, cout;
};

void fill_random(std::vector<float>& v, std::mt19937& rng) {
    std::uniform_real_distribution<float> d(-0.5f, 0.5f);
    for (float& x : v) x = d(rng);
}

double bench_one(const Shape& s, int mode, double seconds, int threads) {
    auto worker = [&](double* gflops) {
        std::mt19937 rng(7);
        PlaneBuf<float> x(s.cin), y(s.cout), dx(s.cin);
        std::vector<float> w(size_t(s.cout) * s.cin * s.k * s.k), b(size_t(s.cout));
        std::vector<float> dw(w.size()), db(b.size()), dyT(size_t(528) * ((s.cout + 15) / 16 * 16));
        fill_random(w, rng);
        fill_random(b, rng);
        for (int c = 0; c < s.cin; ++c)
            for (int h = 0; h < kMapH; ++h)
                for (int wx = 0; wx < kMapW; ++wx) x.at(c, h, wx) = float((c + h + wx) % 13) * 0.1f;

        const double flopsPer = 2.0 * kMapH * kMapW * (double(s.cin) * s.k * s.k + 1) * s.cout;
        int iters = 0;
        const double t0 = now();
        while (now() - t0 < seconds) {
            if (mode == 0) {
                if (s.k == 3)
                    conv3x3_forward(x.ch(0), s.cin, w.data(), b.data(), y.ch(0), s.cout, true);
                else
                    conv1x1_forward(x.ch(0), s.cin, w.data(), b.data(), y.ch(0), s.cout, true);
            } else if (mode == 1) {
                if (s.k == 3)
                    conv3x3_backward_data(y.ch(0), s.cout, w.data(), dx.ch(0), s.cin, false);
                else
                    conv1x1_backward_data(y.ch(0), s.cout, w.data(), dx.ch(0), s.cin, false);
            } else {
                if (s.k == 3)
                    conv3x3_backward_weights(x.ch(0), s.cin, y.ch(0), s.cout, dw.data(), db.data(),
                                             dyT.data());
                else
                    conv1x1_backward_weights(x.ch(0), s.cin, y.ch(0), s.cout, dw.data(), db.data(),
                                             dyT.data());
            }
            ++iters;
        }
        *gflops = flopsPer * iters / (now() - t0) / 1e9;
    };

    std::vector<double> results(size_t(threads), 0.0);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, &results[size_t(t)]);
    for (auto& th : pool) th.join();
    double total = 0;
    for (double g : results) total += g;
    return total;
}

}  // namespace

int main(int argc, char** argv) {
    const double seconds = argc > 1 ? std::atof(argv[1]) : 1.0;
    const int hw = int(std::thread::hardware_concurrency());
    const Shape shapes[] = {
        {"conv2b 3x3 128->64", 3, 128, 64},
        {"conv4  3x3 128->64", 3, 128, 64},
        {"conv5L 3x3  64->16", 3, 64, 16},
        {"conv2a 1x1 128->64", 1, 128, 64},
        {"conv1b 3x3   1->64", 3, 1, 64},
    };
    const char* modes[] = {"fwd", "bwd_data", "bwd_wgt"};
    for (const Shape& s : shapes) {
        for (int m = 0; m < 3; ++m) {
            const double g1 = bench_one(s, m, seconds, 1);
            const double gn = bench_one(s, m, seconds, hw);
            std::printf("%-20s %-8s  1T %7.1f GF/s   %dT %7.1f GF/s\n", s.name, modes[m], g1, hw, gn);
        }
    }
    return 0;
}
