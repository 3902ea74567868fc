#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "limd/common.hpp"

namespace limd {

// Six distinct modes, entry 0 always Planar.
using MpmList = std::array<int, 6>;

// Deterministic MPM construction from the left/above neighbor modes
// (pass Planar for unavailable neighbors): start [Planar]; append each
// angular neighbor; for each distinct angular neighbor m append m-1 and m+1
// (wrapping inside [2,66]); then fill from {DC, 50, 18, 46, 54}, skipping
// duplicates, until six entries.
MpmList derive_mpm(int leftMode, int aboveMode);

// Code length of a signaled mode under the fixed-length model:
// mpm[0] -> 2 bits, mpm[1..5] -> 3,4,5,6,6; non-MPM modes sorted by index,
// first three -> 6 bits, remaining 58 -> 7 bits.
int mode_bits(int mode, const MpmList& mpm);

// Concrete binarization matching mode_bits: 1-bit mpm flag, then a truncated
// unary index inside the list or a truncated binary code over the 61
// non-MPM modes. Returns (value, bitCount) pairs ready for a bit writer.
struct ModeCode {
    uint32_t bits = 0;
    int length = 0;
};
ModeCode encode_mode(int mode, const MpmList& mpm);
int decode_mode(const MpmList& mpm, const std::function<int(int)>& readBits);

// One coded block in the signaling trace.
struct TraceEntry {
    int x = 0, y = 0, w = 0, h = 0;
    int mode = 0;
    bool usedDlimd = false;
    int modeBits = 0;
    int flagBits = 0;
    int residBits = 0;
    int otherBits = 0;
    uint64_t distortion = 0;
};

struct TraceStats {
    double alphaPrime = 0;  // mode bits per block (DLIMD blocks contribute 0)
    double beta = 0;        // mode bits / total block bits
    double gamma = 0;       // DLIMD fraction (block count)
    double flagBitsPerBlock = 0;
    size_t blocks = 0;
};

// Table-1 style bookkeeping over a trace. Throws EmptyInput on an empty one.
TraceStats bpm_stats(const std::vector<TraceEntry>& trace);

// Predicted mode-signaling bit saving as a function of the baseline bits per
// mode (alpha), the mode-bit share (beta) and the derivation take-up rate
// (gamma); the entropy terms vanish at gamma in {0,1}.
double bit_saving_eta(double alpha, double beta, double gamma);

// Line-oriented trace file (one block per line) consumed by the metrics
// module and the eval tooling.
void write_trace(const std::string& path, const std::vector<TraceEntry>& trace);
std::vector<TraceEntry> read_trace(const std::string& path);

}  // namespace limd
