#include "limd/signaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "limd/intra.hpp"

namespace limd {

namespace {

int wrap_angular(int m) {
    if (m < 2) return 66;
    if (m > 66) return 2;
    return m;
}

}  // namespace

MpmList derive_mpm(int leftMode, int aboveMode) {
    if (leftMode < 0 || leftMode > 66 || aboveMode < 0 || aboveMode > 66)
        throw InvalidArgument("neighbor mode out of range");

    MpmList list{};
    int n = 0;
    auto push = [&](int m) {
        if (n >= 6) return;
        for (int i = 0; i < n; ++i)
            if (list[size_t(i)] == m) return;
        list[size_t(n++)] = m;
    };

    push(kPlanarMode);
    if (is_angular(leftMode)) push(leftMode);
    if (is_angular(aboveMode)) push(aboveMode);
    // Neighbor expansion: each distinct angular neighbor contributes its
    // wrapped predecessor/successor, left first.
    int seen[2] = {-1, -1};
    int seenCount = 0;
    for (int m : {leftMode, aboveMode}) {
        if (!is_angular(m)) continue;
        bool dup = false;
        for (int i = 0; i < seenCount; ++i) dup |= (seen[i] == m);
        if (dup) continue;
        seen[seenCount++] = m;
        push(wrap_angular(m - 1));
        push(wrap_angular(m + 1));
    }
    for (int m : {kDcMode, kVerticalMode, kHorizontalMode, 46, 54}) push(m);
    return list;
}

namespace {

// Rank of `mode` among the 61 modes outside the list, ascending by index,
// or -1 when the mode is in the list.
int non_mpm_rank(int mode, const MpmList& mpm) {
    int rank = 0;
    for (int m = 0; m < kNumIntraModes; ++m) {
        const bool inList = std::find(mpm.begin(), mpm.end(), m) != mpm.end();
        if (m == mode) return inList ? -1 : rank;
        if (!inList) ++rank;
    }
    return -1;
}

constexpr int kMpmIndexBits[6] = {1, 2, 3, 4, 5, 5};  // truncated unary, after the mpm flag

}  // namespace

int mode_bits(int mode, const MpmList& mpm) {
    const ModeCode c = encode_mode(mode, mpm);
    return c.length;
}

ModeCode encode_mode(int mode, const MpmList& mpm) {
    if (mode < 0 || mode >= kNumIntraModes) throw InvalidArgument("mode out of range");
    ModeCode c;
    const auto it = std::find(mpm.begin(), mpm.end(), mode);
    if (it != mpm.end()) {
        const int idx = int(it - mpm.begin());
        // mpm flag '1', then truncated unary: idx ones terminated by a zero
        // (the last index omits the terminator).
        c.bits = 1;
        c.length = 1;
        for (int i = 0; i < idx; ++i) {
            c.bits = (c.bits << 1) | 1;
            ++c.length;
        }
        if (idx < 5) {
            c.bits <<= 1;
            ++c.length;
        }
        return c;
    }
    // mpm flag '0', then truncated binary over 61 symbols: ranks 0..2 in
    // 5 bits, ranks 3..60 in 6 bits (offset by 3).
    const int rank = non_mpm_rank(mode, mpm);
    if (rank < 3) {
        c.bits = uint32_t(rank);
        c.length = 1 + 5;
    } else {
        c.bits = uint32_t(rank + 3);
        c.length = 1 + 6;
    }
    return c;
}

int decode_mode(const MpmList& mpm, const std::function<int(int)>& readBits) {
    if (readBits(1)) {
        int idx = 0;
        while (idx < 5 && readBits(1)) ++idx;
        return mpm[size_t(idx)];
    }
    int v = readBits(5);
    if (v >= 3) v = ((v << 1) | readBits(1)) - 3;
    // v is now the rank among non-MPM modes
    int rank = 0;
    for (int m = 0; m < kNumIntraModes; ++m) {
        if (std::find(mpm.begin(), mpm.end(), m) != mpm.end()) continue;
        if (rank == v) return m;
        ++rank;
    }
    throw StreamMismatch("non-mpm rank out of range");
}

TraceStats bpm_stats(const std::vector<TraceEntry>& trace) {
    if (trace.empty()) throw EmptyInput("empty signaling trace");
    TraceStats s;
    s.blocks = trace.size();
    uint64_t modeBits = 0, flagBits = 0, totalBits = 0, dlimd = 0;
    for (const TraceEntry& e : trace) {
        modeBits += uint64_t(e.modeBits);
        flagBits += uint64_t(e.flagBits);
        totalBits += uint64_t(e.modeBits + e.flagBits + e.residBits + e.otherBits);
        dlimd += e.usedDlimd ? 1 : 0;
    }
    s.alphaPrime = double(modeBits) / double(trace.size());
    s.beta = totalBits ? double(modeBits) / double(totalBits) : 0.0;
    s.gamma = double(dlimd) / double(trace.size());
    s.flagBitsPerBlock = double(flagBits) / double(trace.size());
    return s;
}

double bit_saving_eta(double alpha, double beta, double gamma) {
    if (alpha <= 0) throw InvalidArgument("alpha must be positive");
    if (beta < 0 || beta > 1 || gamma < 0 || gamma > 1) throw InvalidArgument("beta/gamma must be fractions");
    const double gTerm = gamma > 0 ? -gamma * std::log2(gamma) : 0.0;
    const double cTerm = gamma < 1 ? (1.0 - gamma) * (alpha - std::log2(1.0 - gamma)) : 0.0;
    return (alpha - (gTerm + cTerm)) / alpha * beta;
}

void write_trace(const std::string& path, const std::vector<TraceEntry>& trace) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace " + path);
    out << "# limd-trace v1: x y w h mode dlimd modeBits flagBits residBits otherBits dist\n";
    for (const TraceEntry& e : trace) {
        out << e.x << ' ' << e.y << ' ' << e.w << ' ' << e.h << ' ' << e.mode << ' ' << (e.usedDlimd ? 1 : 0)
            << ' ' << e.modeBits << ' ' << e.flagBits << ' ' << e.residBits << ' ' << e.otherBits << ' '
            << e.distortion << '\n';
    }
}

std::vector<TraceEntry> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TruncatedInput("cannot open trace " + path);
    std::vector<TraceEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        TraceEntry e;
        int dlimd = 0;
        ls >> e.x >> e.y >> e.w >> e.h >> e.mode >> dlimd >> e.modeBits >> e.flagBits >> e.residBits >>
            e.otherBits >> e.distortion;
        if (!ls) throw CorruptDataset("malformed trace line: " + line);
        e.usedDlimd = dlimd != 0;
        out.push_back(e);
    }
    return out;
}

}  // namespace limd
