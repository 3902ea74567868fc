#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <new>

namespace limd::nn {

// Feature-map geometry shared by every convolutional layer: the spatial size
// is the 4 x 132 reference canvas throughout (stride-1, same padding).
// Each channel is stored with a one-sample zero halo so the 3x3 kernels can
// run branch-free; rows are padded to 144 floats. The halo and slack must
// stay zero: kernels only ever write the interior.
inline constexpr int kMapH = 4;
inline constexpr int kMapW = 132;
inline constexpr int kRowStride = 144;
inline constexpr int kPlaneRows = kMapH + 2;
// 16 floats of tail slack keep shifted vector loads off the end of the
// buffer; like the halo, the slack is zero and never written.
inline constexpr size_t kPlaneSize = size_t(kPlaneRows) * kRowStride + 16;

// Offset of real sample (h, w), h in [0,4), w in [0,132).
inline size_t plane_offset(int h, int w) { return size_t(h + 1) * kRowStride + (w + 1); }

// Minimal 64-byte-aligned buffer for feature maps and transpose scratch.
template <typename T>
class AlignedBuf {
public:
    AlignedBuf() = default;
    explicit AlignedBuf(size_t n) { assign(n, T(0)); }
    AlignedBuf(const AlignedBuf& o) { *this = o; }
    AlignedBuf(AlignedBuf&& o) noexcept : data_(o.data_), size_(o.size_) {
        o.data_ = nullptr;
        o.size_ = 0;
    }
    AlignedBuf& operator=(const AlignedBuf& o) {
        if (this != &o) {
            assign(o.size_, T(0));
            std::copy(o.data_, o.data_ + o.size_, data_);
        }
        return *this;
    }
    AlignedBuf& operator=(AlignedBuf&& o) noexcept {
        std::swap(data_, o.data_);
        std::swap(size_, o.size_);
        return *this;
    }
    ~AlignedBuf() { std::free(data_); }

    void assign(size_t n, T v) {
        if (n != size_) {
            std::free(data_);
            const size_t bytes = (n * sizeof(T) + 63) / 64 * 64;
            data_ = static_cast<T*>(std::aligned_alloc(64, bytes));
            if (!data_ && n) throw std::bad_alloc();
            size_ = n;
        }
        std::fill(data_, data_ + size_, v);
    }

    size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    T* data() { return data_; }
    const T* data() const { return data_; }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }
    T* begin() { return data_; }
    T* end() { return data_ + size_; }
    const T* begin() const { return data_; }
    const T* end() const { return data_ + size_; }

private:
    T* data_ = nullptr;
    size_t size_ = 0;
};

template <typename T>
struct PlaneBuf {
    int channels = 0;
    AlignedBuf<T> data;

    PlaneBuf() = default;
    explicit PlaneBuf(int c) { resize(c); }

    void resize(int c) {
        channels = c;
        data.assign(size_t(c) * kPlaneSize, T(0));
    }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    T* ch(int c) { return data.data() + size_t(c) * kPlaneSize; }
    const T* ch(int c) const { return data.data() + size_t(c) * kPlaneSize; }

    T at(int c, int h, int w) const { return ch(c)[plane_offset(h, w)]; }
    T& at(int c, int h, int w) { return ch(c)[plane_offset(h, w)]; }
};

}  // namespace limd::nn
