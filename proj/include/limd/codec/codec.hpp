#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "limd/codec/bitstream.hpp"
#include "limd/dataset.hpp"
#include "limd/frame.hpp"
#include "limd/nn/net.hpp"
#include "limd/signaling.hpp"

namespace limd {

double lambda_for_qp(int qp);  // 0.57 * 2^((qp-12)/3)
double qstep_for_qp(int qp);   // 2^((qp-4)/6)

struct RdConfig {
    int qp = 32;
    PartitionConfig partition;
    bool dlimdEnabled = false;
    bool forceTraditional = false;  // keep the flag and its cost, never pick derivation
    bool refSourcePixels = false;   // extraction-time feature source switch
};

// Called once per coded block at commit time with the features the block saw
// and its final selected mode (the dataset extractor plugs in here).
using SampleSink =
    std::function<void(const ReferenceCanvas&, const std::array<float, kHandcraftedDim>&, int mode,
                       const Rect&)>;

struct EncodeResult {
    std::vector<uint8_t> bitstream;
    std::vector<TraceEntry> trace;
    Frame recon;
    double totalRdCost = 0;  // sum of leaf costs + lambda * split bits
    uint64_t splitBits = 0;
    uint64_t payloadBits = 0;
};

struct DecodeResult {
    Frame frame;
    std::vector<TraceEntry> trace;
    size_t netInvocations = 0;
};

// Intra-only encoder: per block the explicit 67-mode RD sweep competes with
// network mode derivation (when enabled); the strategy flag is coded
// whenever derivation is on. The bitstream binds the checkpoint by digest.
EncodeResult encode_frame(const Frame& frame, const RdConfig& cfg, const nn::NetworkF* net,
                          const SampleSink& sink = nullptr);

DecodeResult decode_frame(std::span<const uint8_t> bytes, const nn::NetworkF* net);

}  // namespace limd
