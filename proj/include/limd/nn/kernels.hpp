#pragma once

#include "limd/nn/plane.hpp"

namespace limd::nn {

// Convolution kernels over PlaneBuf storage. Weights are laid out
// w[co][ci][kh][kw] (3x3) or w[co][ci] (1x1); `relu` clamps at store time.
// The float instantiations carry SIMD fast paths; other scalar types use the
// portable loops (the double path backs the finite-difference tests).
//
// The *_r variants run a [begin, end) slice of the kernel's output dimension
// so one sample's layer can be split across threads; slices must align to 4
// channels for the float paths.

template <typename T>
void conv3x3_forward_r(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu, int co0,
                       int co1);

template <typename T>
void conv1x1_forward_r(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu, int co0,
                       int co1);

template <typename T>
void conv3x3_forward(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu) {
    conv3x3_forward_r(x, cin, w, b, y, cout, relu, 0, cout);
}

template <typename T>
void conv1x1_forward(const T* x, int cin, const T* w, const T* b, T* y, int cout, bool relu) {
    conv1x1_forward_r(x, cin, w, b, y, cout, relu, 0, cout);
}

// dX from dY through the transposed kernel. `wT` is the rotated/transposed
// weight block wT[ci][co][kh][kw] (or wT[ci][co] for 1x1). With
// accumulate=false the destination is overwritten. `maskRef`, when non-null,
// zeroes output lanes whose reference activation is <= 0 (the ReLU backward
// fused into the final store); pass it only on the last accumulating call.
// The range slices dx channels.

template <typename T>
void conv3x3_backward_data_r(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                             const T* maskRef, int c0, int c1);

template <typename T>
void conv1x1_backward_data_r(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                             const T* maskRef, int c0, int c1);

template <typename T>
void conv3x3_backward_data(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                           const T* maskRef = nullptr) {
    conv3x3_backward_data_r(dy, cout, wT, dx, cin, accumulate, maskRef, 0, cin);
}

template <typename T>
void conv1x1_backward_data(const T* dy, int cout, const T* wT, T* dx, int cin, bool accumulate,
                           const T* maskRef = nullptr) {
    conv1x1_backward_data_r(dy, cout, wT, dx, cin, accumulate, maskRef, 0, cin);
}

// Weight/bias gradient accumulation (always +=). dW uses the transposed
// layout dw[ci][kh][kw][co] (dw[ci][co] for 1x1) so the SIMD path vectorizes
// over output channels without horizontal reductions.
//   conv_bias_grad     db slice over [co0, co1)
//   conv3x3_dy_transpose   fills dyT[h*132+w][co] over a wx slice
//   conv3x3_backward_weights_rows  tap gradients over a ci slice
//   conv1x1_backward_weights_r     over a ci slice

template <typename T>
void conv_bias_grad(const T* dy, T* db, int co0, int co1);

template <typename T>
void conv3x3_dy_transpose(const T* dy, int cout, T* dyT, int wx0, int wx1);

template <typename T>
void conv3x3_backward_weights_rows(const T* x, const T* dyT, int cout, T* dwT, int ci0, int ci1);

template <typename T>
void conv1x1_backward_weights_r(const T* x, int cin, const T* dy, int cout, T* dwT, int ci0, int ci1);

// Convenience whole-layer wrappers (tests, benches).
template <typename T>
void conv3x3_backward_weights(const T* x, int cin, const T* dy, int cout, T* dwT, T* db, T* dyT) {
    conv_bias_grad(dy, db, 0, cout);
    conv3x3_dy_transpose(dy, cout, dyT, 0, kMapW);
    conv3x3_backward_weights_rows(x, dyT, cout, dwT, 0, cin);
}

template <typename T>
void conv1x1_backward_weights(const T* x, int cin, const T* dy, int cout, T* dwT, T* db, T* dyT) {
    (void)dyT;
    conv_bias_grad(dy, db, 0, cout);
    conv1x1_backward_weights_r(x, cin, dy, cout, dwT, 0, cin);
}

// d[i] = 0 where out[i] <= 0, for flat vectors.
template <typename T>
void relu_mask_inplace(T* d, const T* out, size_t n);

// Dense layer: w[o][i] row-major.
template <typename T>
void dense_forward_r(const T* x, int in, const T* w, const T* b, T* y, int out, bool relu, int o0, int o1);

template <typename T>
void dense_forward(const T* x, int in, const T* w, const T* b, T* y, int out, bool relu) {
    dense_forward_r(x, in, w, b, y, out, relu, 0, out);
}

// Accumulates the [o0, o1) slice's contribution into dx (caller zeroes).
template <typename T>
void dense_backward_data_partial(const T* dy, const T* w, T* dx, int in, int o0, int o1);

template <typename T>
void dense_backward_data(const T* dy, int out, const T* w, T* dx, int in) {
    for (int i = 0; i < in; ++i) dx[i] = T(0);
    dense_backward_data_partial(dy, w, dx, in, 0, out);
}

template <typename T>
void dense_backward_weights_r(const T* x, int in, const T* dy, T* dw, T* db, int o0, int o1);

template <typename T>
void dense_backward_weights(const T* x, int in, const T* dy, int out, T* dw, T* db) {
    dense_backward_weights_r(x, in, dy, dw, db, 0, out);
}

}  // namespace limd::nn
