#include "limd/codec/dct.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace limd {

namespace {

// basis[k][n] = c(k) cos(pi (2n+1) k / 2N), c(0) = sqrt(1/N), else sqrt(2/N)
const std::vector<double>& basis(int n) {
    static std::map<int, std::vector<double>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> c(size_t(n) * n);
    for (int k = 0; k < n; ++k) {
        const double s = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
        for (int x = 0; x < n; ++x) c[size_t(k) * n + x] = s * std::cos(M_PI * (2 * x + 1) * k / (2.0 * n));
    }
    return cache.emplace(n, std::move(c)).first->second;
}

}  // namespace

void dct2_forward(const double* block, int w, int h, double* coeff) {
    const std::vector<double>& cw = basis(w);
    const std::vector<double>& ch = basis(h);
    std::vector<double> tmp(size_t(w) * h);
    // rows: tmp[y][v] = sum_x block[y][x] cw[v][x]
    for (int y = 0; y < h; ++y)
        for (int v = 0; v < w; ++v) {
            double acc = 0;
            for (int x = 0; x < w; ++x) acc += block[size_t(y) * w + x] * cw[size_t(v) * w + x];
            tmp[size_t(y) * w + v] = acc;
        }
    // cols: coeff[u][v] = sum_y ch[u][y] tmp[y][v]
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            double acc = 0;
            for (int y = 0; y < h; ++y) acc += ch[size_t(u) * h + y] * tmp[size_t(y) * w + v];
            coeff[size_t(u) * w + v] = acc;
        }
}

void dct2_inverse(const double* coeff, int w, int h, double* block) {
    const std::vector<double>& cw = basis(w);
    const std::vector<double>& ch = basis(h);
    std::vector<double> tmp(size_t(w) * h);
    // cols: tmp[y][v] = sum_u ch[u][y] coeff[u][v]
    for (int y = 0; y < h; ++y)
        for (int v = 0; v < w; ++v) {
            double acc = 0;
            for (int u = 0; u < h; ++u) acc += ch[size_t(u) * h + y] * coeff[size_t(u) * w + v];
            tmp[size_t(y) * w + v] = acc;
        }
    // rows: block[y][x] = sum_v tmp[y][v] cw[v][x]
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int v = 0; v < w; ++v) acc += tmp[size_t(y) * w + v] * cw[size_t(v) * w + x];
            block[size_t(y) * w + x] = acc;
        }
}

}  // namespace limd
