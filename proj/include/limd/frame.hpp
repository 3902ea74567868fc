#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "limd/common.hpp"

namespace limd {

// 8-bit luma picture. Chroma planes of 4:2:0 input are skipped on read.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> samples;  // row-major, width*height

    uint8_t at(int x, int y) const { return samples[size_t(y) * width + x]; }
    uint8_t& at(int x, int y) { return samples[size_t(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

// Coding block geometry. Legal dimensions are {4, 8, 16, 32, 64}.
struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    bool operator==(const Rect&) const = default;
};

bool is_legal_block_dim(int n);

// Reconstruction state shared by encoder and decoder: decoded samples plus a
// per-4x4-cell coded flag and the final selected mode of the covering block.
// A sample is meaningful only once its cell's coded flag is set.
class ReconBuffer {
public:
    ReconBuffer() = default;
    ReconBuffer(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    uint8_t sample(int x, int y) const { return samples_[size_t(y) * width_ + x]; }
    void set_sample(int x, int y, uint8_t v) { samples_[size_t(y) * width_ + x] = v; }

    bool coded(int x, int y) const;  // false outside the picture
    uint8_t mode_at(int x, int y) const;

    void mark_coded(const Rect& r, uint8_t mode);
    void clear(const Rect& r);

    const std::vector<uint8_t>& plane() const { return samples_; }
    std::vector<uint8_t>& plane() { return samples_; }

    // Region snapshot for RD search rollback.
    struct Snapshot {
        Rect r;
        std::vector<uint8_t> samples;
        std::vector<uint8_t> flags;
        std::vector<uint8_t> modes;
    };
    Snapshot save(const Rect& r) const;
    void restore(const Snapshot& s);

private:
    int width_ = 0, height_ = 0;
    int cellsX_ = 0, cellsY_ = 0;
    std::vector<uint8_t> samples_;
    std::vector<uint8_t> codedCells_;
    std::vector<uint8_t> modeCells_;
};

enum class FrameFormat { Raw420Luma, PortablePixmap };

// Reads one frame. Raw 4:2:0 files must hold at least w*h*3/2 bytes; the luma
// plane is consumed and chroma skipped. Portable pixmaps (binary P5/P6) carry
// their own geometry; P6 color is reduced to luma with integer BT.601 weights
// (77, 150, 29)/256.
Frame load_frame(const std::string& path, int width, int height, FrameFormat format);

struct PartitionConfig {
    enum class Mode { Fixed, RdQuad } mode = Mode::Fixed;
    int fixedSize = 16;  // used when mode == Fixed
};

// Fixed-size tiling in raster order. Edges not divisible by the requested
// size are covered by clipped rects shrunk to the largest legal size that
// fits, so every emitted rect has legal dimensions.
std::vector<Rect> partition_fixed(int width, int height, int blockSize);

// Quadtree walk shared by the partitioner, encoder and decoder. Roots are a
// 64x64 grid; nodes crossing the picture boundary split implicitly (no
// decision is asked), fully-outside children are dropped. For fully-inside
// nodes that can split (both halves still legal), `wantSplit` is consulted;
// leaves are reported through `emit` in z-order.
void walk_quadtree(int width, int height, const std::function<bool(const Rect&)>& wantSplit,
                   const std::function<void(const Rect&)>& emit);

// Partition entry point. RdQuad requires a split decider (the codec supplies
// one backed by trial encodes).
std::vector<Rect> partition(const Frame& frame, const PartitionConfig& cfg,
                            const std::function<bool(const Rect&)>& wantSplit = nullptr);

}  // namespace limd
