#include "limd/nn/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "limd/nn/kernels.hpp"

namespace limd::nn {

VariantConfig VariantConfig::named(std::string_view tag) {
    VariantConfig c;
    c.tag = std::string(tag);
    if (tag == "dlimd") {
        // defaults
    } else if (tag == "dlimd-l") {
        c.conv5Out = 16;
        c.hidden = 128;
    } else if (tag == "ablation-h") {
        c.fln = FlnKind::None;
    } else if (tag == "ablation-l") {
        c.f0mode = F0Mode::None;
    } else if (tag == "ablation-hl-first") {
        c.f0Dim = kNumNeighborModes + 1;  // neighbor modes + qp, histogram dropped
    } else if (tag == "serial" || tag == "serial-fig9") {
        c.tag = "serial";
        c.fln = FlnKind::Serial;
        c.f0mode = F0Mode::FirstLayer;
    } else {
        throw InvalidArgument("unknown variant: " + std::string(tag));
    }
    return c;
}

int VariantConfig::fc_input(int layer) const {
    const int base = layer == 0 ? flatten_dim() : hidden;
    const bool withF0 = f0mode == F0Mode::EveryLayer || (f0mode == F0Mode::FirstLayer && layer == 0);
    return base + (withF0 ? f0Dim : 0);
}

template <typename T>
Network<T>::Network(const VariantConfig& cfg) : cfg_(cfg) {
    auto conv = [&](std::string name, int k, int cin, int cout) {
        ConvParam<T> p;
        p.name = std::move(name);
        p.k = k;
        p.cin = cin;
        p.cout = cout;
        p.w.assign(size_t(cout) * cin * k * k, T(0));
        p.b.assign(size_t(cout), T(0));
        p.wT.assign(p.w.size(), T(0));
        convs.push_back(std::move(p));
    };
    if (cfg_.fln == FlnKind::Parallel) {
        conv("conv1a", 1, 1, 64);
        conv("conv1b", 3, 1, 64);
        conv("conv2a", 1, 128, 64);
        conv("conv2b", 3, 128, 64);
        conv("conv3a", 1, 128, 64);
        conv("conv3b", 3, 128, 64);
        conv("conv4", 3, 128, 64);
        conv("conv5", 3, 64, cfg_.conv5Out);
    } else if (cfg_.fln == FlnKind::Serial) {
        conv("conv1", 1, 1, 128);
        conv("conv2", 3, 128, 128);
        conv("conv3", 1, 128, 128);
        conv("conv4", 3, 128, 64);
        conv("conv5", 3, 64, cfg_.conv5Out);
    }
    for (int i = 0; i < 5; ++i) {
        DenseParam<T> d;
        d.name = "fc" + std::to_string(i + 1);
        d.in = cfg_.fc_input(i);
        d.out = cfg_.fc_output(i);
        d.w.assign(size_t(d.out) * d.in, T(0));
        d.b.assign(size_t(d.out), T(0));
        fcs.push_back(std::move(d));
    }
}

template <typename T>
void Network<T>::init_weights(uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto heUniform = [&](std::vector<T>& w, int fanIn) {
        const double limit = std::sqrt(6.0 / fanIn);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (T& v : w) v = T(dist(rng));
    };
    for (auto& c : convs) {
        heUniform(c.w, c.cin * c.k * c.k);
        std::fill(c.b.begin(), c.b.end(), T(0));
    }
    for (auto& d : fcs) {
        heUniform(d.w, d.in);
        std::fill(d.b.begin(), d.b.end(), T(0));
    }
    refresh_transposed();
}

template <typename T>
void Network<T>::refresh_transposed() {
    for (auto& c : convs) {
        const int kk = c.k * c.k;
        for (int co = 0; co < c.cout; ++co)
            for (int ci = 0; ci < c.cin; ++ci)
                for (int t = 0; t < kk; ++t) {
                    const int rot = c.k == 3 ? (2 - t / 3) * 3 + (2 - t % 3) : 0;
                    c.wT[(size_t(ci) * c.cout + co) * kk + rot] = c.w[(size_t(co) * c.cin + ci) * kk + t];
                }
    }
}

template <typename T>
void Network<T>::make_workspace(Workspace<T>& ws) const {
    const int stages = cfg_.fln == FlnKind::None ? 0 : 6;
    ws.act.resize(size_t(stages));
    ws.dact.resize(size_t(stages));
    if (stages) {
        const int chan[6] = {1, 128, 128, 128, 64, cfg_.conv5Out};
        for (int i = 0; i < 6; ++i) {
            ws.act[size_t(i)].resize(chan[i]);
            ws.dact[size_t(i)].resize(chan[i]);
        }
        ws.flat.assign(size_t(cfg_.flatten_dim()), T(0));
        ws.dflat.assign(size_t(cfg_.flatten_dim()), T(0));
        ws.dyT.assign(size_t(kMapH) * kMapW * 128, T(0));
        ws.dyT2.assign(size_t(kMapH) * kMapW * 128, T(0));
    }
    int maxIn = 0;
    for (int i = 0; i < 5; ++i) {
        ws.fcIn[size_t(i)].assign(size_t(cfg_.fc_input(i)), T(0));
        ws.dfcIn[size_t(i)].assign(size_t(cfg_.fc_input(i)), T(0));
        ws.fcOut[size_t(i)].assign(size_t(cfg_.fc_output(i)), T(0));
        ws.dfcOut[size_t(i)].assign(size_t(cfg_.fc_output(i)), T(0));
        if (i < 4) ws.dropMask[size_t(i)].assign(size_t(cfg_.fc_output(i)), 1);
        maxIn = std::max(maxIn, cfg_.fc_input(i));
    }
    ws.dxScratch.assign(size_t(maxIn), T(0));
}

template <typename T>
Gradients<T> Network<T>::make_gradients() const {
    Gradients<T> g;
    for (const auto& c : convs) {
        g.tensors.emplace_back(c.w.size(), T(0));
        g.tensors.emplace_back(c.b.size(), T(0));
    }
    for (const auto& d : fcs) {
        g.tensors.emplace_back(d.w.size(), T(0));
        g.tensors.emplace_back(d.b.size(), T(0));
    }
    return g;
}

template <typename T>
void Network<T>::fill_f0(const float* f0, T* dst) const {
    if (cfg_.f0Dim == kHandcraftedDim) {
        for (int i = 0; i < kHandcraftedDim; ++i) dst[i] = T(f0[i]);
    } else {
        for (int i = 0; i < cfg_.f0Dim; ++i) dst[i] = T(f0[kHistBins + i]);
    }
}

namespace {

inline bool drop_keep(uint64_t stream, int idx) {
    const uint64_t word = mix64(stream, uint64_t(idx >> 6));
    return (word >> (idx & 63)) & 1;
}

inline int pool_threads(ParallelPool* pool) { return pool ? pool->threads() : 1; }

template <typename Fn>
void pool_run(ParallelPool* pool, const Fn& fn) {
    if (pool) {
        pool->run(fn);
    } else {
        fn(0);
    }
}

}  // namespace

template <typename T>
void Network<T>::forward_fln(Workspace<T>& ws, ParallelPool* pool) const {
    const int nt = pool_threads(pool);
    auto runPair = [&](int ia, int ib, const PlaneBuf<T>& x, PlaneBuf<T>& y) {
        const ConvParam<T>& a = convs[size_t(ia)];
        const ConvParam<T>& b = convs[size_t(ib)];
        pool_run(pool, [&](int tid) {
            const auto [a0, a1] = ParallelPool::slice(a.cout, 4, tid, nt);
            conv1x1_forward_r(x.ch(0), a.cin, a.w.data(), a.b.data(), y.ch(0), a.cout, true, a0, a1);
            const auto [b0, b1] = ParallelPool::slice(b.cout, 4, tid, nt);
            conv3x3_forward_r(x.ch(0), b.cin, b.w.data(), b.b.data(), y.ch(a.cout), b.cout, true, b0, b1);
        });
    };
    auto runOne = [&](int i, const PlaneBuf<T>& x, PlaneBuf<T>& y) {
        const ConvParam<T>& c = convs[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [c0, c1] = ParallelPool::slice(c.cout, 4, tid, nt);
            if (c.k == 3)
                conv3x3_forward_r(x.ch(0), c.cin, c.w.data(), c.b.data(), y.ch(0), c.cout, true, c0, c1);
            else
                conv1x1_forward_r(x.ch(0), c.cin, c.w.data(), c.b.data(), y.ch(0), c.cout, true, c0, c1);
        });
    };

    if (cfg_.fln == FlnKind::Parallel) {
        runPair(0, 1, ws.act[0], ws.act[1]);
        runPair(2, 3, ws.act[1], ws.act[2]);
        runPair(4, 5, ws.act[2], ws.act[3]);
        runOne(6, ws.act[3], ws.act[4]);
        runOne(7, ws.act[4], ws.act[5]);
    } else {
        for (int i = 0; i < 5; ++i) runOne(i, ws.act[size_t(i)], ws.act[size_t(i + 1)]);
    }

    // flatten channel-major
    const PlaneBuf<T>& top = ws.act[5];
    pool_run(pool, [&](int tid) {
        const auto [c0, c1] = ParallelPool::slice(top.channels, 1, tid, nt);
        T* out = ws.flat.data() + size_t(c0) * kMapH * kMapW;
        for (int c = c0; c < c1; ++c)
            for (int h = 0; h < kMapH; ++h) {
                const T* row = top.ch(c) + plane_offset(h, 0);
                for (int w = 0; w < kMapW; ++w) *out++ = row[w];
            }
    });
}

template <typename T>
void Network<T>::forward(const float* canvas, const float* f0, Workspace<T>& ws, const DropoutPlan& drop,
                         ParallelPool* pool) const {
    const int nt = pool_threads(pool);
    ws.dropActive = drop.enabled;
    if (cfg_.fln != FlnKind::None) {
        PlaneBuf<T>& in = ws.act[0];
        for (int h = 0; h < kMapH; ++h) {
            T* row = in.ch(0) + plane_offset(h, 0);
            for (int w = 0; w < kMapW; ++w) row[w] = T(canvas[h * kMapW + w]);
        }
        forward_fln(ws, pool);
    }

    for (int i = 0; i < 5; ++i) {
        std::vector<T>& x = ws.fcIn[size_t(i)];
        const int base = i == 0 ? cfg_.flatten_dim() : cfg_.hidden;
        if (i == 0) {
            std::copy(ws.flat.begin(), ws.flat.end(), x.begin());
        } else {
            const std::vector<T>& prev = ws.fcOut[size_t(i - 1)];
            std::vector<uint8_t>& mask = ws.dropMask[size_t(i - 1)];
            const uint64_t stream = mix64(drop.seed, uint64_t(i));
            for (int j = 0; j < base; ++j) {
                if (drop.enabled) {
                    const bool keep = drop_keep(stream, j);
                    mask[size_t(j)] = keep ? 1 : 0;
                    x[size_t(j)] = keep ? prev[size_t(j)] * T(1.0 / DropoutPlan::kKeep) : T(0);
                } else {
                    mask[size_t(j)] = 1;
                    x[size_t(j)] = prev[size_t(j)];
                }
            }
        }
        if (int(x.size()) > base) fill_f0(f0, x.data() + base);
        const DenseParam<T>& d = fcs[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [o0, o1] = ParallelPool::slice(d.out, 1, tid, nt);
            dense_forward_r(x.data(), d.in, d.w.data(), d.b.data(), ws.fcOut[size_t(i)].data(), d.out,
                            i < 4, o0, o1);
        });
    }

    // softmax over the 67 logits
    std::vector<T>& z = ws.fcOut[4];
    T mx = z[0];
    for (T v : z) mx = std::max(mx, v);
    T sum = 0;
    for (T& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (T& v : z) v /= sum;
}

template <typename T>
void Network<T>::backward(int label, T scale, Workspace<T>& ws, Gradients<T>& grads,
                          ParallelPool* pool) const {
    const int nt = pool_threads(pool);
    const int nConvTensors = int(convs.size()) * 2;
    auto gFcW = [&](int i) { return grads.tensors[size_t(nConvTensors + i * 2)].data(); };
    auto gFcB = [&](int i) { return grads.tensors[size_t(nConvTensors + i * 2 + 1)].data(); };

    // softmax + cross entropy combined
    std::vector<T>& dz = ws.dfcOut[4];
    const std::vector<T>& probs = ws.fcOut[4];
    for (int j = 0; j < kNumClasses; ++j)
        dz[size_t(j)] = (probs[size_t(j)] - (j == label ? T(1) : T(0))) * scale;

    for (int i = 4; i >= 0; --i) {
        const DenseParam<T>& d = fcs[size_t(i)];
        std::vector<T>& dx = ws.dfcIn[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [o0, o1] = ParallelPool::slice(d.out, 1, tid, nt);
            dense_backward_weights_r(ws.fcIn[size_t(i)].data(), d.in, ws.dfcOut[size_t(i)].data(),
                                     gFcW(i), gFcB(i), o0, o1);
            T* target = tid == 0 ? dx.data() : ws.dxScratch.data();
            for (int k = 0; k < d.in; ++k) target[k] = T(0);
            dense_backward_data_partial(ws.dfcOut[size_t(i)].data(), d.w.data(), target, d.in, o0, o1);
        });
        if (nt > 1)
            for (int k = 0; k < d.in; ++k) dx[size_t(k)] += ws.dxScratch[size_t(k)];

        const int base = i == 0 ? cfg_.flatten_dim() : cfg_.hidden;
        if (i == 0) {
            std::copy(dx.begin(), dx.begin() + base, ws.dflat.begin());
        } else {
            // back through dropout and relu into the previous layer's output
            std::vector<T>& dprev = ws.dfcOut[size_t(i - 1)];
            const std::vector<T>& prev = ws.fcOut[size_t(i - 1)];
            const std::vector<uint8_t>& mask = ws.dropMask[size_t(i - 1)];
            for (int j = 0; j < base; ++j) {
                T g = dx[size_t(j)];
                if (mask[size_t(j)] == 0)
                    g = T(0);
                else if (ws.dropActive)
                    g *= T(1.0 / DropoutPlan::kKeep);
                if (!(prev[size_t(j)] > T(0))) g = T(0);
                dprev[size_t(j)] = g;
            }
        }
    }

    if (cfg_.fln == FlnKind::None) return;

    // unflatten with fused relu mask
    {
        PlaneBuf<T>& d5 = ws.dact[5];
        const PlaneBuf<T>& a5 = ws.act[5];
        pool_run(pool, [&](int tid) {
            const auto [c0, c1] = ParallelPool::slice(d5.channels, 1, tid, nt);
            const T* src = ws.dflat.data() + size_t(c0) * kMapH * kMapW;
            for (int c = c0; c < c1; ++c)
                for (int h = 0; h < kMapH; ++h) {
                    T* drow = d5.ch(c) + plane_offset(h, 0);
                    const T* arow = a5.ch(c) + plane_offset(h, 0);
                    for (int w = 0; w < kMapW; ++w) {
                        drow[w] = arow[w] > T(0) ? *src : T(0);
                        ++src;
                    }
                }
        });
    }
    backward_fln(ws, grads, pool);
}

template <typename T>
void Network<T>::backward_fln(Workspace<T>& ws, Gradients<T>& grads, ParallelPool* pool) const {
    const int nt = pool_threads(pool);
    auto gW = [&](int i) { return grads.tensors[size_t(i) * 2].data(); };
    auto gB = [&](int i) { return grads.tensors[size_t(i) * 2 + 1].data(); };

    // weight/bias gradients for a 3x3 conv reading dy at a channel offset
    auto weights3 = [&](int i, const PlaneBuf<T>& x, const T* dy, T* dyT) {
        const ConvParam<T>& c = convs[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [b0, b1] = ParallelPool::slice(c.cout, 1, tid, nt);
            conv_bias_grad(dy, gB(i), b0, b1);
            const auto [w0, w1] = ParallelPool::slice(kMapW, 1, tid, nt);
            conv3x3_dy_transpose(dy, c.cout, dyT, w0, w1);
        });
        pool_run(pool, [&](int tid) {
            const auto [c0, c1] = ParallelPool::slice(c.cin, 1, tid, nt);
            conv3x3_backward_weights_rows(x.ch(0), dyT, c.cout, gW(i), c0, c1);
        });
    };
    auto weights1 = [&](int i, const PlaneBuf<T>& x, const T* dy) {
        const ConvParam<T>& c = convs[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [b0, b1] = ParallelPool::slice(c.cout, 1, tid, nt);
            conv_bias_grad(dy, gB(i), b0, b1);
            const auto [c0, c1] = ParallelPool::slice(c.cin, 4, tid, nt);
            conv1x1_backward_weights_r(x.ch(0), c.cin, dy, c.cout, gW(i), c0, c1);
        });
    };
    // dx for a single producer
    auto dataOne = [&](int i, const T* dy, PlaneBuf<T>& dx, const PlaneBuf<T>* mask) {
        const ConvParam<T>& c = convs[size_t(i)];
        pool_run(pool, [&](int tid) {
            const auto [c0, c1] = ParallelPool::slice(c.cin, 4, tid, nt);
            const T* m = mask ? mask->ch(0) : static_cast<const T*>(nullptr);
            if (c.k == 3)
                conv3x3_backward_data_r(dy, c.cout, c.wT.data(), dx.ch(0), c.cin, false, m, c0, c1);
            else
                conv1x1_backward_data_r(dy, c.cout, c.wT.data(), dx.ch(0), c.cin, false, m, c0, c1);
        });
    };
    // dx accumulated from a branch pair (1x1 then 3x3), mask on the sum
    auto dataPair = [&](int ia, int ib, const PlaneBuf<T>& dyBuf, PlaneBuf<T>& dx,
                        const PlaneBuf<T>& mask) {
        const ConvParam<T>& a = convs[size_t(ia)];
        const ConvParam<T>& b = convs[size_t(ib)];
        pool_run(pool, [&](int tid) {
            const auto [c0, c1] = ParallelPool::slice(a.cin, 4, tid, nt);
            conv1x1_backward_data_r(dyBuf.ch(0), a.cout, a.wT.data(), dx.ch(0), a.cin, false,
                                    static_cast<const T*>(nullptr), c0, c1);
            conv3x3_backward_data_r(dyBuf.ch(a.cout), b.cout, b.wT.data(), dx.ch(0), b.cin, true,
                                    mask.ch(0), c0, c1);
        });
    };

    if (cfg_.fln == FlnKind::Parallel) {
        weights3(7, ws.act[4], ws.dact[5].ch(0), ws.dyT.data());
        dataOne(7, ws.dact[5].ch(0), ws.dact[4], &ws.act[4]);
        weights3(6, ws.act[3], ws.dact[4].ch(0), ws.dyT.data());
        dataOne(6, ws.dact[4].ch(0), ws.dact[3], &ws.act[3]);

        // stage 3 (act2 -> act3 halves)
        weights1(4, ws.act[2], ws.dact[3].ch(0));
        weights3(5, ws.act[2], ws.dact[3].ch(64), ws.dyT.data());
        dataPair(4, 5, ws.dact[3], ws.dact[2], ws.act[2]);
        // stage 2
        weights1(2, ws.act[1], ws.dact[2].ch(0));
        weights3(3, ws.act[1], ws.dact[2].ch(64), ws.dyT.data());
        dataPair(2, 3, ws.dact[2], ws.dact[1], ws.act[1]);
        // stage 1: no data gradient toward the input canvas
        weights1(0, ws.act[0], ws.dact[1].ch(0));
        weights3(1, ws.act[0], ws.dact[1].ch(64), ws.dyT.data());
    } else {
        weights3(4, ws.act[4], ws.dact[5].ch(0), ws.dyT.data());
        dataOne(4, ws.dact[5].ch(0), ws.dact[4], &ws.act[4]);
        weights3(3, ws.act[3], ws.dact[4].ch(0), ws.dyT.data());
        dataOne(3, ws.dact[4].ch(0), ws.dact[3], &ws.act[3]);
        weights1(2, ws.act[2], ws.dact[3].ch(0));
        dataOne(2, ws.dact[3].ch(0), ws.dact[2], &ws.act[2]);
        weights3(1, ws.act[1], ws.dact[2].ch(0), ws.dyT.data());
        dataOne(1, ws.dact[2].ch(0), ws.dact[1], &ws.act[1]);
        weights1(0, ws.act[0], ws.dact[1].ch(0));
    }
}

template <typename T>
void Network<T>::for_each_param(const std::function<void(const std::string&, std::vector<T>&, bool, int,
                                                         int, int)>& fn) {
    for (auto& c : convs) {
        fn(c.name + ".w", c.w, true, c.cin, c.k, c.cout);
        fn(c.name + ".b", c.b, false, 0, 0, 0);
    }
    for (auto& d : fcs) {
        fn(d.name + ".w", d.w, false, 0, 0, 0);
        fn(d.name + ".b", d.b, false, 0, 0, 0);
    }
}

template <typename T>
size_t Network<T>::param_count() const {
    size_t n = 0;
    for (const auto& c : convs) n += c.w.size() + c.b.size();
    for (const auto& d : fcs) n += d.w.size() + d.b.size();
    return n;
}

template <typename T>
T cross_entropy(const T* probs, int n, int label) {
    if (label < 0 || label >= n) throw InvalidArgument("label out of range");
    const T p = std::max(probs[label], T(1e-12));
    return -std::log(p);
}

template class Network<float>;
template class Network<double>;
template float cross_entropy<float>(const float*, int, int);
template double cross_entropy<double>(const double*, int, int);

}  // namespace limd::nn
