#include "limd/frame.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace limd {

bool is_legal_block_dim(int n) { return n == 4 || n == 8 || n == 16 || n == 32 || n == 64; }

ReconBuffer::ReconBuffer(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0)
        throw InvalidArgument("recon geometry must be positive and a multiple of 4");
    cellsX_ = width / 4;
    cellsY_ = height / 4;
    samples_.assign(size_t(width) * height, 0);
    codedCells_.assign(size_t(cellsX_) * cellsY_, 0);
    modeCells_.assign(size_t(cellsX_) * cellsY_, 0);
}

bool ReconBuffer::coded(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    return codedCells_[size_t(y / 4) * cellsX_ + (x / 4)] != 0;
}

uint8_t ReconBuffer::mode_at(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return 0;
    return modeCells_[size_t(y / 4) * cellsX_ + (x / 4)];
}

void ReconBuffer::mark_coded(const Rect& r, uint8_t mode) {
    for (int cy = r.y / 4; cy < (r.y + r.h) / 4; ++cy)
        for (int cx = r.x / 4; cx < (r.x + r.w) / 4; ++cx) {
            codedCells_[size_t(cy) * cellsX_ + cx] = 1;
            modeCells_[size_t(cy) * cellsX_ + cx] = mode;
        }
}

void ReconBuffer::clear(const Rect& r) {
    for (int cy = r.y / 4; cy < (r.y + r.h) / 4; ++cy)
        for (int cx = r.x / 4; cx < (r.x + r.w) / 4; ++cx) {
            codedCells_[size_t(cy) * cellsX_ + cx] = 0;
            modeCells_[size_t(cy) * cellsX_ + cx] = 0;
        }
}

ReconBuffer::Snapshot ReconBuffer::save(const Rect& r) const {
    Snapshot s;
    s.r = r;
    s.samples.reserve(size_t(r.w) * r.h);
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) s.samples.push_back(sample(x, y));
    for (int cy = r.y / 4; cy < (r.y + r.h) / 4; ++cy)
        for (int cx = r.x / 4; cx < (r.x + r.w) / 4; ++cx) {
            s.flags.push_back(codedCells_[size_t(cy) * cellsX_ + cx]);
            s.modes.push_back(modeCells_[size_t(cy) * cellsX_ + cx]);
        }
    return s;
}

void ReconBuffer::restore(const Snapshot& s) {
    size_t i = 0;
    for (int y = s.r.y; y < s.r.y + s.r.h; ++y)
        for (int x = s.r.x; x < s.r.x + s.r.w; ++x) set_sample(x, y, s.samples[i++]);
    size_t c = 0;
    for (int cy = s.r.y / 4; cy < (s.r.y + s.r.h) / 4; ++cy)
        for (int cx = s.r.x / 4; cx < (s.r.x + s.r.w) / 4; ++cx) {
            codedCells_[size_t(cy) * cellsX_ + cx] = s.flags[c];
            modeCells_[size_t(cy) * cellsX_ + cx] = s.modes[c];
            ++c;
        }
}

namespace {

int pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one unsigned integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw TruncatedInput("malformed pnm header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}

Frame load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TruncatedInput("cannot open " + path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6')) throw InvalidArgument("unsupported pnm type in " + path);
    int w = pnm_token(in);
    int h = pnm_token(in);
    int maxval = pnm_token(in);
    if (w <= 0 || h <= 0) throw InvalidArgument("bad pnm geometry");
    if (maxval != 255) throw InvalidArgument("only 8-bit pnm supported");
    Frame f;
    f.width = w;
    f.height = h;
    f.samples.resize(size_t(w) * h);
    if (kind == '5') {
        in.read(reinterpret_cast<char*>(f.samples.data()), std::streamsize(f.samples.size()));
        if (size_t(in.gcount()) != f.samples.size()) throw TruncatedInput("short pgm payload in " + path);
    } else {
        std::vector<uint8_t> rgb(size_t(w) * h * 3);
        in.read(reinterpret_cast<char*>(rgb.data()), std::streamsize(rgb.size()));
        if (size_t(in.gcount()) != rgb.size()) throw TruncatedInput("short ppm payload in " + path);
        for (size_t i = 0; i < f.samples.size(); ++i) {
            int r = rgb[i * 3], g = rgb[i * 3 + 1], b = rgb[i * 3 + 2];
            int y = (77 * r + 150 * g + 29 * b + 128) >> 8;  // integer BT.601, full range
            f.samples[i] = uint8_t(std::clamp(y, 0, 255));
        }
    }
    return f;
}

}  // namespace

Frame load_frame(const std::string& path, int width, int height, FrameFormat format) {
    if (format == FrameFormat::PortablePixmap) return load_pnm(path);

    if (width <= 0 || height <= 0) throw InvalidArgument("raw geometry must be positive");
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw TruncatedInput("cannot open " + path);
    const auto size = in.tellg();
    const size_t lumaBytes = size_t(width) * height;
    const size_t frameBytes = lumaBytes + lumaBytes / 2;  // 4:2:0 chroma present but skipped
    if (size_t(size) < frameBytes) throw TruncatedInput("raw file shorter than one 4:2:0 frame: " + path);
    in.seekg(0);
    Frame f;
    f.width = width;
    f.height = height;
    f.samples.resize(lumaBytes);
    in.read(reinterpret_cast<char*>(f.samples.data()), std::streamsize(lumaBytes));
    if (size_t(in.gcount()) != lumaBytes) throw TruncatedInput("short luma read from " + path);
    return f;
}

namespace {

// Greedy 1-D cover: from `from`, take the largest legal size <= min(maxStep, remaining).
std::vector<int> axis_cuts(int extent, int maxStep) {
    std::vector<int> cuts;
    int pos = 0;
    while (pos < extent) {
        int remain = extent - pos;
        int step = 4;
        for (int s : {64, 32, 16, 8, 4}) {
            if (s <= maxStep && s <= remain) {
                step = s;
                break;
            }
        }
        if (step > remain) throw InvalidArgument("frame extent must be a multiple of 4");
        cuts.push_back(pos);
        pos += step;
    }
    cuts.push_back(extent);
    return cuts;
}

}  // namespace

std::vector<Rect> partition_fixed(int width, int height, int blockSize) {
    if (!is_legal_block_dim(blockSize)) throw InvalidArgument("fixed partition size must be in {4,8,16,32,64}");
    if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0)
        throw InvalidArgument("frame dimensions must be positive multiples of 4");
    const auto xs = axis_cuts(width, blockSize);
    const auto ys = axis_cuts(height, blockSize);
    std::vector<Rect> out;
    for (size_t j = 0; j + 1 < ys.size(); ++j)
        for (size_t i = 0; i + 1 < xs.size(); ++i)
            out.push_back({xs[i], ys[j], xs[i + 1] - xs[i], ys[j + 1] - ys[j]});
    return out;
}

namespace {

void walk_node(const Rect& node, int width, int height, const std::function<bool(const Rect&)>& wantSplit,
               const std::function<void(const Rect&)>& emit) {
    const bool inside = node.x + node.w <= width && node.y + node.h <= height;
    const bool splittable = node.w > 4 && node.h > 4;
    bool split;
    if (!inside) {
        if (!splittable) throw InvalidArgument("frame dimensions must be multiples of 4");
        split = true;  // implicit boundary split, no decision consulted
    } else {
        split = splittable && wantSplit && wantSplit(node);
    }
    if (!split) {
        emit(node);
        return;
    }
    const int hw = node.w / 2, hh = node.h / 2;
    const Rect children[4] = {{node.x, node.y, hw, hh},
                              {node.x + hw, node.y, hw, hh},
                              {node.x, node.y + hh, hw, hh},
                              {node.x + hw, node.y + hh, hw, hh}};
    for (const Rect& c : children) {
        if (c.x >= width || c.y >= height) continue;  // fully outside
        walk_node(c, width, height, wantSplit, emit);
    }
}

}  // namespace

void walk_quadtree(int width, int height, const std::function<bool(const Rect&)>& wantSplit,
                   const std::function<void(const Rect&)>& emit) {
    if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0)
        throw InvalidArgument("frame dimensions must be positive multiples of 4");
    for (int y = 0; y < height; y += 64)
        for (int x = 0; x < width; x += 64) walk_node({x, y, 64, 64}, width, height, wantSplit, emit);
}

std::vector<Rect> partition(const Frame& frame, const PartitionConfig& cfg,
                            const std::function<bool(const Rect&)>& wantSplit) {
    if (cfg.mode == PartitionConfig::Mode::Fixed) return partition_fixed(frame.width, frame.height, cfg.fixedSize);
    std::vector<Rect> out;
    walk_quadtree(frame.width, frame.height, wantSplit, [&](const Rect& r) { out.push_back(r); });
    return out;
}

}  // namespace limd
