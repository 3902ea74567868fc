#include "limd/nn/kernels.hpp"

#include <cstring>
#include <type_traits>

namespace limd::nn {

namespace {

// Input channels are processed in blocks this size so the streamed x planes
// stay cache-resident across output-channel sweeps.
constexpr int kCiBlock = 128;

// ------------------------------------------------------------------
// Portable scalar paths (double instantiations and odd channel counts).
// ------------------------------------------------------------------

template <typename T>
void conv3x3_core_generic(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu,
                          bool accumulate, const T* maskRef, int co0, int co1) {
    for (int co = co0; co < co1; ++co) {
        T* yc = y + size_t(co) * kPlaneSize;
        const T* mc = maskRef ? maskRef + size_t(co) * kPlaneSize : nullptr;
        for (int h = 0; h < kMapH; ++h)
            for (int wx = 0; wx < kMapW; ++wx) {
                T acc = accumulate ? yc[plane_offset(h, wx)] : (b ? b[co] : T(0));
                for (int ci = 0; ci < cin; ++ci) {
                    const T* xc = x + size_t(ci) * kPlaneSize;
                    const T* wk = w + (size_t(co) * cin + ci) * 9;
                    for (int kh = 0; kh < 3; ++kh)
                        for (int kw = 0; kw < 3; ++kw)
                            acc += wk[kh * 3 + kw] * xc[size_t(h + kh) * kRowStride + (wx + kw)];
                }
                if (relu && acc < T(0)) acc = T(0);
                if (mc && !(mc[plane_offset(h, wx)] > T(0))) acc = T(0);
                yc[plane_offset(h, wx)] = acc;
            }
    }
}

template <typename T>
void conv1x1_core_generic(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu,
                          bool accumulate, const T* maskRef, int co0, int co1) {
    for (int co = co0; co < co1; ++co) {
        T* yc = y + size_t(co) * kPlaneSize;
        const T* mc = maskRef ? maskRef + size_t(co) * kPlaneSize : nullptr;
        for (int h = 0; h < kMapH; ++h)
            for (int wx = 0; wx < kMapW; ++wx) {
                T acc = accumulate ? yc[plane_offset(h, wx)] : (b ? b[co] : T(0));
                for (int ci = 0; ci < cin; ++ci)
                    acc += w[size_t(co) * cin + ci] * x[size_t(ci) * kPlaneSize + plane_offset(h, wx)];
                if (relu && acc < T(0)) acc = T(0);
                if (mc && !(mc[plane_offset(h, wx)] > T(0))) acc = T(0);
                yc[plane_offset(h, wx)] = acc;
            }
    }
}

// ------------------------------------------------------------------
// Float SIMD paths via GCC vector extensions (16 lanes).
// ------------------------------------------------------------------

typedef float vf16 __attribute__((vector_size(64)));
typedef float vf16u __attribute__((vector_size(64), aligned(4)));
typedef float vf8 __attribute__((vector_size(32)));
typedef float vf4 __attribute__((vector_size(16)));

inline vf16 vload(const float* p) { return *reinterpret_cast<const vf16u*>(p); }
inline void vstore(float* p, vf16 v) { *reinterpret_cast<vf16u*>(p) = v; }
inline vf16 vsplat(float s) { return (vf16){} + s; }

inline vf16 vrelu(vf16 v) {
    const vf16 z = {};
    return v > z ? v : z;
}

inline vf16 vmask(vf16 v, vf16 ref) {
    const vf16 z = {};
    return ref > z ? v : z;
}

inline float vsum(vf16 v) {
    vf8 lo, hi;
    std::memcpy(&lo, reinterpret_cast<const char*>(&v), 32);
    std::memcpy(&hi, reinterpret_cast<const char*>(&v) + 32, 32);
    const vf8 s8 = lo + hi;
    vf4 l4, h4;
    std::memcpy(&l4, reinterpret_cast<const char*>(&s8), 16);
    std::memcpy(&h4, reinterpret_cast<const char*>(&s8) + 16, 16);
    const vf4 s4 = l4 + h4;
    return (s4[0] + s4[2]) + (s4[1] + s4[3]);
}

// Disjoint interior cover. The tail chunk at 129 extends into the halo and
// slack region: reduction kernels rely on the dy lanes there being zero,
// store kernels mask lanes >= 4 back to zero so the halo stays intact.
constexpr int kChunkRed[9] = {1, 17, 33, 49, 65, 81, 97, 113, 129};

inline vf16 tail_mask() {
    vf16 m = {};
    for (int i = 0; i < 4; ++i) m[i] = 1.0f;
    return m;
}

// Four output channels x two width chunks; per-tap partial accumulators keep
// 8+ independent FMA chains alive. Runs one input-channel block of one
// output-channel slice.
void conv3x3_block_f(const float* x, int ci0, int ci1, int cin, const float* w, const float* b, float* y,
                     bool relu, bool accumulate, const float* maskRef, int co0, int co1) {
    const bool first = ci0 == 0;
    const bool last = ci1 == cin;
    for (int co = co0; co < co1; co += 4) {
        float* yc[4] = {y + size_t(co) * kPlaneSize, y + size_t(co + 1) * kPlaneSize,
                        y + size_t(co + 2) * kPlaneSize, y + size_t(co + 3) * kPlaneSize};
        const float* wco[4] = {w + (size_t(co) * cin + ci0) * 9, w + (size_t(co + 1) * cin + ci0) * 9,
                               w + (size_t(co + 2) * cin + ci0) * 9, w + (size_t(co + 3) * cin + ci0) * 9};
        for (int h = 0; h < kMapH; ++h) {
            for (int c = 0; c < 9; c += 2) {
                const bool pair = c + 1 < 9;
                const int ca = kChunkRed[c];
                const int cb = kChunkRed[pair ? c + 1 : c];
                const bool tailA = c == 8;
                const size_t offA = size_t(h + 1) * kRowStride + ca;
                const size_t offB = size_t(h + 1) * kRowStride + cb;
                vf16 aA0 = {}, aA1 = {}, aA2 = {}, aA3 = {};
                vf16 aB0 = {}, aB1 = {}, aB2 = {}, aB3 = {};
                const float* xc = x + size_t(ci0) * kPlaneSize;
                const float* w0 = wco[0];
                const float* w1 = wco[1];
                const float* w2 = wco[2];
                const float* w3 = wco[3];
                for (int ci = ci0; ci < ci1; ++ci, xc += kPlaneSize, w0 += 9, w1 += 9, w2 += 9, w3 += 9) {
                    for (int kh = 0; kh < 3; ++kh) {
                        const float* xr = xc + size_t(h + kh) * kRowStride;
                        const vf16 u0 = vload(xr + ca - 1);
                        const vf16 u1 = vload(xr + ca);
                        const vf16 u2 = vload(xr + ca + 1);
                        aA0 += u0 * w0[kh * 3] + u1 * w0[kh * 3 + 1] + u2 * w0[kh * 3 + 2];
                        aA1 += u0 * w1[kh * 3] + u1 * w1[kh * 3 + 1] + u2 * w1[kh * 3 + 2];
                        aA2 += u0 * w2[kh * 3] + u1 * w2[kh * 3 + 1] + u2 * w2[kh * 3 + 2];
                        aA3 += u0 * w3[kh * 3] + u1 * w3[kh * 3 + 1] + u2 * w3[kh * 3 + 2];
                        if (pair) {
                            const vf16 t0 = vload(xr + cb - 1);
                            const vf16 t1 = vload(xr + cb);
                            const vf16 t2 = vload(xr + cb + 1);
                            aB0 += t0 * w0[kh * 3] + t1 * w0[kh * 3 + 1] + t2 * w0[kh * 3 + 2];
                            aB1 += t0 * w1[kh * 3] + t1 * w1[kh * 3 + 1] + t2 * w1[kh * 3 + 2];
                            aB2 += t0 * w2[kh * 3] + t1 * w2[kh * 3 + 1] + t2 * w2[kh * 3 + 2];
                            aB3 += t0 * w3[kh * 3] + t1 * w3[kh * 3 + 1] + t2 * w3[kh * 3 + 2];
                        }
                    }
                }
                const vf16 accA[4] = {aA0, aA1, aA2, aA3};
                const vf16 accB[4] = {aB0, aB1, aB2, aB3};
                for (int j = 0; j < 4; ++j) {
                    const vf16 base = (first && !accumulate) ? vsplat(b ? b[co + j] : 0.0f)
                                                             : vload(yc[j] + offA);
                    vf16 v = accA[j] + base;
                    if (last) {
                        if (relu) v = vrelu(v);
                        if (maskRef) v = vmask(v, vload(maskRef + size_t(co + j) * kPlaneSize + offA));
                    }
                    if (tailA) v *= tail_mask();
                    vstore(yc[j] + offA, v);
                    if (pair) {
                        const vf16 baseB = (first && !accumulate) ? vsplat(b ? b[co + j] : 0.0f)
                                                                  : vload(yc[j] + offB);
                        vf16 u = accB[j] + baseB;
                        if (last) {
                            if (relu) u = vrelu(u);
                            if (maskRef) u = vmask(u, vload(maskRef + size_t(co + j) * kPlaneSize + offB));
                        }
                        vstore(yc[j] + offB, u);
                    }
                }
            }
        }
    }
}

void conv3x3_core_f(const float* x, int cin, const float* w, const float* b, float* y, int cout, bool relu,
                    bool accumulate, const float* maskRef, int co0, int co1) {
    if (cout % 4 != 0 || co0 % 4 != 0 || co1 % 4 != 0) {
        conv3x3_core_generic(x, cin, w, b, y, cout, relu, accumulate, maskRef, co0, co1);
        return;
    }
    for (int b0 = 0; b0 < cin; b0 += kCiBlock)
        conv3x3_block_f(x, b0, std::min(cin, b0 + kCiBlock), cin, w, b, y, relu, accumulate, maskRef, co0,
                        co1);
}

void conv1x1_block_f(const float* x, int ci0, int ci1, int cin, const float* w, const float* b, float* y,
                     bool relu, bool accumulate, const float* maskRef, int co0, int co1) {
    const bool first = ci0 == 0;
    const bool last = ci1 == cin;
    for (int co = co0; co < co1; co += 4) {
        const float* wr[4] = {w + size_t(co) * cin, w + size_t(co + 1) * cin, w + size_t(co + 2) * cin,
                              w + size_t(co + 3) * cin};
        float* yr[4] = {y + size_t(co) * kPlaneSize, y + size_t(co + 1) * kPlaneSize,
                        y + size_t(co + 2) * kPlaneSize, y + size_t(co + 3) * kPlaneSize};
        for (int h = 0; h < kMapH; ++h) {
            for (int c = 0; c < 9; c += 2) {
                const bool pair = c + 1 < 9;
                const bool tailA = c == 8;
                const size_t offA = size_t(h + 1) * kRowStride + kChunkRed[c];
                const size_t offB = size_t(h + 1) * kRowStride + kChunkRed[pair ? c + 1 : c];
                vf16 aA[4] = {{}, {}, {}, {}};
                vf16 aB[4] = {{}, {}, {}, {}};
                const float* xpA = x + size_t(ci0) * kPlaneSize + offA;
                const float* xpB = x + size_t(ci0) * kPlaneSize + offB;
                for (int ci = ci0; ci < ci1; ++ci, xpA += kPlaneSize, xpB += kPlaneSize) {
                    const float s0 = wr[0][ci];
                    const float s1 = wr[1][ci];
                    const float s2 = wr[2][ci];
                    const float s3 = wr[3][ci];
                    const vf16 uA = vload(xpA);
                    aA[0] += uA * s0;
                    aA[1] += uA * s1;
                    aA[2] += uA * s2;
                    aA[3] += uA * s3;
                    if (pair) {
                        const vf16 uB = vload(xpB);
                        aB[0] += uB * s0;
                        aB[1] += uB * s1;
                        aB[2] += uB * s2;
                        aB[3] += uB * s3;
                    }
                }
                for (int j = 0; j < 4; ++j) {
                    const vf16 base = (first && !accumulate) ? vsplat(b ? b[co + j] : 0.0f)
                                                             : vload(yr[j] + offA);
                    vf16 v = aA[j] + base;
                    if (last) {
                        if (relu) v = vrelu(v);
                        if (maskRef) v = vmask(v, vload(maskRef + size_t(co + j) * kPlaneSize + offA));
                    }
                    if (tailA) v *= tail_mask();
                    vstore(yr[j] + offA, v);
                    if (pair) {
                        const vf16 baseB = (first && !accumulate) ? vsplat(b ? b[co + j] : 0.0f)
                                                                  : vload(yr[j] + offB);
                        vf16 u = aB[j] + baseB;
                        if (last) {
                            if (relu) u = vrelu(u);
                            if (maskRef) u = vmask(u, vload(maskRef + size_t(co + j) * kPlaneSize + offB));
                        }
                        vstore(yr[j] + offB, u);
                    }
                }
            }
        }
    }
}

void conv1x1_core_f(const float* x, int cin, const float* w, const float* b, float* y, int cout, bool relu,
                    bool accumulate, const float* maskRef, int co0, int co1) {
    if (cout % 4 != 0 || co0 % 4 != 0 || co1 % 4 != 0) {
        conv1x1_core_generic(x, cin, w, b, y, cout, relu, accumulate, maskRef, co0, co1);
        return;
    }
    for (int b0 = 0; b0 < cin; b0 += kCiBlock)
        conv1x1_block_f(x, b0, std::min(cin, b0 + kCiBlock), cin, w, b, y, relu, accumulate, maskRef, co0,
                        co1);
}

// Weight-gradient inner accumulation. Input channels are processed in pairs
// against chunk-groups of the transposed dy so the 3x2x2 accumulators stay in
// registers while each dyT row is read once per channel pair; width tiles
// keep the dyT slice L1-resident across the ci sweep.
template <int C>
void bwd_w_rows_pair_f(const float* x, const float* dyT, float* dwT, int ci0, int ci1) {
    constexpr int cout = 16 * C;
    constexpr int kTile = 22;  // 132 = 6 * 22
    for (int g0 = 0; g0 < C; g0 += 2) {
        const bool gPair = g0 + 1 < C;
        for (int t0 = 0; t0 < kMapW; t0 += kTile) {
            for (int ci = ci0; ci + 1 < ci1; ci += 2) {
                const float* xa = x + size_t(ci) * kPlaneSize;
                const float* xb = xa + kPlaneSize;
                for (int kh = 0; kh < 3; ++kh) {
                    vf16 aA0 = {}, aA1 = {}, aA2 = {}, aB0 = {}, aB1 = {}, aB2 = {};
                    vf16 cA0 = {}, cA1 = {}, cA2 = {}, cB0 = {}, cB1 = {}, cB2 = {};
                    for (int h = 0; h < kMapH; ++h) {
                        const float* xra = xa + size_t(h + kh) * kRowStride + t0;
                        const float* xrb = xb + size_t(h + kh) * kRowStride + t0;
                        const float* drow = dyT + (size_t(h) * kMapW + t0) * cout + 16 * g0;
                        for (int wx = 0; wx < kTile; ++wx) {
                            const float sa0 = xra[wx];
                            const float sa1 = xra[wx + 1];
                            const float sa2 = xra[wx + 2];
                            const float sb0 = xrb[wx];
                            const float sb1 = xrb[wx + 1];
                            const float sb2 = xrb[wx + 2];
                            const float* d = drow + size_t(wx) * cout;
                            const vf16 g = vload(d);
                            aA0 += g * sa0;
                            aA1 += g * sa1;
                            aA2 += g * sa2;
                            aB0 += g * sb0;
                            aB1 += g * sb1;
                            aB2 += g * sb2;
                            if (gPair) {
                                const vf16 q = vload(d + 16);
                                cA0 += q * sa0;
                                cA1 += q * sa1;
                                cA2 += q * sa2;
                                cB0 += q * sb0;
                                cB1 += q * sb1;
                                cB2 += q * sb2;
                            }
                        }
                    }
                    float* dstA = dwT + (size_t(ci) * 9 + kh * 3) * cout + 16 * g0;
                    float* dstB = dstA + size_t(9) * cout;
                    const vf16 accA[6] = {aA0, aA1, aA2, cA0, cA1, cA2};
                    const vf16 accB[6] = {aB0, aB1, aB2, cB0, cB1, cB2};
                    for (int kw = 0; kw < 3; ++kw) {
                        float* pa = dstA + size_t(kw) * cout;
                        float* pb = dstB + size_t(kw) * cout;
                        vstore(pa, vload(pa) + accA[kw]);
                        vstore(pb, vload(pb) + accB[kw]);
                        if (gPair) {
                            vstore(pa + 16, vload(pa + 16) + accA[3 + kw]);
                            vstore(pb + 16, vload(pb + 16) + accB[3 + kw]);
                        }
                    }
                }
            }
        }
    }
    // odd channel remainder
    if ((ci1 - ci0) % 2) {
        const int ci = ci1 - 1;
        const float* xc = x + size_t(ci) * kPlaneSize;
        for (int kh = 0; kh < 3; ++kh) {
            vf16 a0[C], a1[C], a2[C];
            for (int c = 0; c < C; ++c) a0[c] = a1[c] = a2[c] = (vf16){};
            for (int h = 0; h < kMapH; ++h) {
                const float* xr = xc + size_t(h + kh) * kRowStride;
                const float* drow = dyT + size_t(h) * kMapW * cout;
                for (int wx = 0; wx < kMapW; ++wx) {
                    const float s0 = xr[wx];
                    const float s1 = xr[wx + 1];
                    const float s2 = xr[wx + 2];
                    const float* d = drow + size_t(wx) * cout;
#pragma GCC unroll 8
                    for (int c = 0; c < C; ++c) {
                        const vf16 g = vload(d + 16 * c);
                        a0[c] += g * s0;
                        a1[c] += g * s1;
                        a2[c] += g * s2;
                    }
                }
            }
            float* dst0 = dwT + (size_t(ci) * 9 + kh * 3) * cout;
            float* dst1 = dst0 + cout;
            float* dst2 = dst1 + cout;
            for (int c = 0; c < C; ++c) {
                vstore(dst0 + 16 * c, vload(dst0 + 16 * c) + a0[c]);
                vstore(dst1 + 16 * c, vload(dst1 + 16 * c) + a1[c]);
                vstore(dst2 + 16 * c, vload(dst2 + 16 * c) + a2[c]);
            }
        }
    }
}

void bwd_w_rows_any_f(const float* x, const float* dyT, int cout, float* dwT, int ci0, int ci1) {
    const int chunks = cout / 16;
    for (int ci = ci0; ci < ci1; ++ci) {
        const float* xc = x + size_t(ci) * kPlaneSize;
        for (int kh = 0; kh < 3; ++kh) {
            for (int c = 0; c < chunks; ++c) {
                vf16 a0 = {}, a1 = {}, a2 = {};
                for (int h = 0; h < kMapH; ++h) {
                    const float* xr = xc + size_t(h + kh) * kRowStride;
                    const float* drow = dyT + size_t(h) * kMapW * cout + 16 * c;
                    for (int wx = 0; wx < kMapW; ++wx) {
                        const vf16 g = vload(drow + size_t(wx) * cout);
                        a0 += g * xr[wx];
                        a1 += g * xr[wx + 1];
                        a2 += g * xr[wx + 2];
                    }
                }
                float* dst = dwT + (size_t(ci) * 9 + kh * 3) * cout + 16 * c;
                vstore(dst, vload(dst) + a0);
                vstore(dst + cout, vload(dst + cout) + a1);
                vstore(dst + 2 * cout, vload(dst + 2 * cout) + a2);
            }
        }
    }
}

}  // namespace

// ------------------------------------------------------------------
// Public dispatch
// ------------------------------------------------------------------

template <typename T>
void conv3x3_forward_r(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu, int co0,
                       int co1) {
    if constexpr (std::is_same_v<T, float>)
        conv3x3_core_f(x, cin, w, b, y, cout, relu, false, nullptr, co0, co1);
    else
        conv3x3_core_generic(x, cin, w, b, y, cout, relu, false, static_cast<const T*>(nullptr), co0, co1);
}

template <typename T>
void conv1x1_forward_r(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu, int co0,
                       int co1) {
    if constexpr (std::is_same_v<T, float>)
        conv1x1_core_f(x, cin, w, b, y, cout, relu, false, nullptr, co0, co1);
    else
        conv1x1_core_generic(x, cin, w, b, y, cout, relu, false, static_cast<const T*>(nullptr), co0, co1);
}

template <typename T>
void conv3x3_backward_data_r(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                             const T* maskRef, int c0, int c1) {
    if constexpr (std::is_same_v<T, float>)
        conv3x3_core_f(dy, cout, wT, nullptr, dx, cin, false, accumulate, maskRef, c0, c1);
    else
        conv3x3_core_generic(dy, cout, wT, static_cast<const T*>(nullptr), dx, cin, false, accumulate,
                             maskRef, c0, c1);
}

template <typename T>
void conv1x1_backward_data_r(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                             const T* maskRef, int c0, int c1) {
    if constexpr (std::is_same_v<T, float>)
        conv1x1_core_f(dy, cout, wT, nullptr, dx, cin, false, accumulate, maskRef, c0, c1);
    else
        conv1x1_core_generic(dy, cout, wT, static_cast<const T*>(nullptr), dx, cin, false, accumulate,
                             maskRef, c0, c1);
}

template <typename T>
void conv_bias_grad(const T* dy, T* db, int co0, int co1) {
    for (int co = co0; co < co1; ++co) {
        const T* dyc = dy + size_t(co) * kPlaneSize;
        if constexpr (std::is_same_v<T, float>) {
            vf16 acc = {};
            for (int h = 0; h < kMapH; ++h) {
                const float* row = dyc + size_t(h + 1) * kRowStride;
                for (int c = 0; c < 9; ++c) acc += vload(row + kChunkRed[c]);
            }
            db[co] += vsum(acc);
        } else {
            T acc = 0;
            for (int h = 0; h < kMapH; ++h)
                for (int wx = 0; wx < kMapW; ++wx) acc += dyc[plane_offset(h, wx)];
            db[co] += acc;
        }
    }
}

template <typename T>
void conv3x3_dy_transpose(const T* dy, int cout, T* dyT, int wx0, int wx1) {
    for (int h = 0; h < kMapH; ++h)
        for (int wx = wx0; wx < wx1; ++wx) {
            T* row = dyT + (size_t(h) * kMapW + wx) * cout;
            const size_t off = plane_offset(h, wx);
            for (int co = 0; co < cout; ++co) row[co] = dy[size_t(co) * kPlaneSize + off];
        }
}

template <typename T>
void conv3x3_backward_weights_rows(const T* x, const T* dyT, int cout, T* dwT, int ci0, int ci1) {
    if constexpr (std::is_same_v<T, float>) {
        if (cout == 64) return bwd_w_rows_pair_f<4>(x, dyT, dwT, ci0, ci1);
        if (cout == 16) return bwd_w_rows_pair_f<1>(x, dyT, dwT, ci0, ci1);
        if (cout == 128) return bwd_w_rows_pair_f<8>(x, dyT, dwT, ci0, ci1);
        if (cout % 16 == 0) return bwd_w_rows_any_f(x, dyT, cout, dwT, ci0, ci1);
    }
    for (int ci = ci0; ci < ci1; ++ci) {
        const T* xc = x + size_t(ci) * kPlaneSize;
        for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw)
                for (int co = 0; co < cout; ++co) {
                    T acc = 0;
                    for (int h = 0; h < kMapH; ++h)
                        for (int wx = 0; wx < kMapW; ++wx)
                            acc += dyT[(size_t(h) * kMapW + wx) * cout + co] *
                                   xc[size_t(h + kh) * kRowStride + (wx + kw)];
                    dwT[(size_t(ci) * 9 + kh * 3 + kw) * cout + co] += acc;
                }
    }
}

template <typename T>
void conv1x1_backward_weights_r(const T* x, int cin, const T* dy, int cout, T* dwT, int ci0, int ci1) {
    if constexpr (std::is_same_v<T, float>) {
        if (cout % 4 == 0 && ci0 % 4 == 0 && ci1 % 4 == 0) {
            for (int co = 0; co < cout; co += 4) {
                const float* d0 = dy + size_t(co) * kPlaneSize;
                const float* d1 = dy + size_t(co + 1) * kPlaneSize;
                const float* d2 = dy + size_t(co + 2) * kPlaneSize;
                const float* d3 = dy + size_t(co + 3) * kPlaneSize;
                for (int ci = ci0; ci < ci1; ci += 4) {
                    const float* x0 = x + size_t(ci) * kPlaneSize;
                    const float* x1 = x + size_t(ci + 1) * kPlaneSize;
                    const float* x2 = x + size_t(ci + 2) * kPlaneSize;
                    const float* x3 = x + size_t(ci + 3) * kPlaneSize;
                    vf16 a00 = {}, a01 = {}, a02 = {}, a03 = {};
                    vf16 a10 = {}, a11 = {}, a12 = {}, a13 = {};
                    vf16 a20 = {}, a21 = {}, a22 = {}, a23 = {};
                    vf16 a30 = {}, a31 = {}, a32 = {}, a33 = {};
                    for (int h = 0; h < kMapH; ++h) {
                        const size_t ro = size_t(h + 1) * kRowStride;
                        for (int c = 0; c < 9; ++c) {
                            const size_t off = ro + kChunkRed[c];
                            const vf16 g0 = vload(d0 + off);
                            const vf16 g1 = vload(d1 + off);
                            const vf16 g2 = vload(d2 + off);
                            const vf16 g3 = vload(d3 + off);
                            const vf16 u0 = vload(x0 + off);
                            const vf16 u1 = vload(x1 + off);
                            const vf16 u2 = vload(x2 + off);
                            const vf16 u3 = vload(x3 + off);
                            a00 += g0 * u0;
                            a01 += g0 * u1;
                            a02 += g0 * u2;
                            a03 += g0 * u3;
                            a10 += g1 * u0;
                            a11 += g1 * u1;
                            a12 += g1 * u2;
                            a13 += g1 * u3;
                            a20 += g2 * u0;
                            a21 += g2 * u1;
                            a22 += g2 * u2;
                            a23 += g2 * u3;
                            a30 += g3 * u0;
                            a31 += g3 * u1;
                            a32 += g3 * u2;
                            a33 += g3 * u3;
                        }
                    }
                    const vf16 accs[16] = {a00, a01, a02, a03, a10, a11, a12, a13,
                                           a20, a21, a22, a23, a30, a31, a32, a33};
                    for (int a = 0; a < 4; ++a)
                        for (int bi = 0; bi < 4; ++bi)
                            dwT[size_t(ci + bi) * cout + (co + a)] += vsum(accs[a * 4 + bi]);
                }
            }
            return;
        }
    }
    for (int co = 0; co < cout; ++co) {
        const T* dyc = dy + size_t(co) * kPlaneSize;
        for (int ci = ci0; ci < ci1; ++ci) {
            const T* xc = x + size_t(ci) * kPlaneSize;
            T acc = 0;
            for (int h = 0; h < kMapH; ++h)
                for (int wx = 0; wx < kMapW; ++wx)
                    acc += dyc[plane_offset(h, wx)] * xc[plane_offset(h, wx)];
            dwT[size_t(ci) * cout + co] += acc;
        }
    }
}

template <typename T>
void relu_mask_inplace(T* d, const T* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!(out[i] > T(0))) d[i] = T(0);
}

template <typename T>
void dense_forward_r(const T* x, int in, const T* w, const T* b, T* y, int out, bool relu, int o0, int o1) {
    (void)out;
    for (int o = o0; o < o1; ++o) {
        const T* row = w + size_t(o) * in;
        T acc = b[o];
        if constexpr (std::is_same_v<T, float>) {
            vf16 v0 = {}, v1 = {};
            int i = 0;
            for (; i + 32 <= in; i += 32) {
                v0 += vload(row + i) * vload(x + i);
                v1 += vload(row + i + 16) * vload(x + i + 16);
            }
            for (; i + 16 <= in; i += 16) v0 += vload(row + i) * vload(x + i);
            acc += vsum(v0 + v1);
            for (; i < in; ++i) acc += row[i] * x[i];
        } else {
            for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        }
        y[o] = relu && acc < T(0) ? T(0) : acc;
    }
}

template <typename T>
void dense_backward_data_partial(const T* dy, const T* w, T* dx, int in, int o0, int o1) {
    for (int o = o0; o < o1; ++o) {
        const T g = dy[o];
        if (g == T(0)) continue;
        const T* row = w + size_t(o) * in;
        if constexpr (std::is_same_v<T, float>) {
            int i = 0;
            for (; i + 16 <= in; i += 16) vstore(dx + i, vload(dx + i) + vload(row + i) * g);
            for (; i < in; ++i) dx[i] += g * row[i];
        } else {
            for (int i = 0; i < in; ++i) dx[i] += g * row[i];
        }
    }
}

template <typename T>
void dense_backward_weights_r(const T* x, int in, const T* dy, T* dw, T* db, int o0, int o1) {
    for (int o = o0; o < o1; ++o) {
        const T g = dy[o];
        db[o] += g;
        if (g == T(0)) continue;
        T* row = dw + size_t(o) * in;
        if constexpr (std::is_same_v<T, float>) {
            int i = 0;
            for (; i + 16 <= in; i += 16) vstore(row + i, vload(row + i) + vload(x + i) * g);
            for (; i < in; ++i) row[i] += g * x[i];
        } else {
            for (int i = 0; i < in; ++i) row[i] += g * x[i];
        }
    }
}

#define LIMD_INSTANTIATE(T)                                                                         \
    template void conv3x3_forward_r<T>(const T*, int, const T*, const T*, T*, int, bool, int, int); \
    template void conv1x1_forward_r<T>(const T*, int, const T*, const T*, T*, int, bool, int, int); \
    template void conv3x3_backward_data_r<T>(const T*, int, const T*, T*, int, bool, const T*, int, \
                                             int);                                                  \
    template void conv1x1_backward_data_r<T>(const T*, int, const T*, T*, int, bool, const T*, int, \
                                             int);                                                  \
    template void conv_bias_grad<T>(const T*, T*, int, int);                                        \
    template void conv3x3_dy_transpose<T>(const T*, int, T*, int, int);                             \
    template void conv3x3_backward_weights_rows<T>(const T*, const T*, int, T*, int, int);          \
    template void conv1x1_backward_weights_r<T>(const T*, int, const T*, int, T*, int, int);        \
    template void relu_mask_inplace<T>(T*, const T*, size_t);                                       \
    template void dense_forward_r<T>(const T*, int, const T*, const T*, T*, int, bool, int, int);   \
    template void dense_backward_data_partial<T>(const T*, const T*, T*, int, int, int);            \
    template void dense_backward_weights_r<T>(const T*, int, const T*, T*, T*, int, int);

LIMD_INSTANTIATE(float)
LIMD_INSTANTIATE(double)

}  // namespace limd::nn
