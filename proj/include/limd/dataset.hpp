#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "limd/features.hpp"
#include "limd/frame.hpp"

namespace limd {

// One training sample: the block's canvas and handcrafted features plus the
// RDO-selected mode as label.
struct SampleRecord {
    ReferenceCanvas canvas{};                       // 528 floats
    std::array<float, kHandcraftedDim> f0{};        // 73 floats
    uint8_t label = 0;
    uint8_t qp = 0;
    uint8_t w = 0;
    uint8_t h = 0;
};

// Dataset file: magic "LIMDDST1", u32 version, u64 record count, then
// fixed-width records (canvas f32x528, f0 f32x73, label u8, qp u8, w u8,
// h u8), little-endian.
void write_dataset(const std::string& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_dataset(const std::string& path);
void append_dataset(const std::string& path, const std::vector<SampleRecord>& records);

struct ExtractConfig {
    std::vector<std::string> inputs;  // frame files
    int width = 0, height = 0;        // raw geometry (pnm carries its own)
    bool pnm = false;
    std::vector<int> qps = {22, 27, 32, 37};
    PartitionConfig partition;
    bool refSourcePixels = false;  // features from source rather than recon
    std::string out;
};

struct ExtractSummary {
    size_t records = 0;
    std::vector<size_t> perLabel = std::vector<size_t>(67, 0);
};

// Runs the encoder (mode derivation disabled) over every (input, qp) pair
// and records one sample per coded block.
ExtractSummary extract_samples(const ExtractConfig& cfg);

// Uniform per-(label, qp) subsample without replacement; throws DeficitError
// naming the starved cells. Output order is shuffled (seeded).
std::vector<SampleRecord> balance(const std::vector<SampleRecord>& in, size_t perLabelPerQp, uint64_t seed);

// Disjoint split with exactly `perLabel` validation records per label.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_validation(
    const std::vector<SampleRecord>& in, size_t perLabel, uint64_t seed);

uint64_t record_digest(const SampleRecord& r);

}  // namespace limd
