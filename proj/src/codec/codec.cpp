#include "limd/codec/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "limd/codec/dct.hpp"
#include "limd/intra.hpp"

namespace limd {

double lambda_for_qp(int qp) { return 0.57 * std::pow(2.0, (qp - 12) / 3.0); }
double qstep_for_qp(int qp) { return std::pow(2.0, (qp - 4) / 6.0); }

namespace {

constexpr char kMagic[4] = {'L', 'V', 'B', '1'};
constexpr uint16_t kVersion = 1;
constexpr double kDeadZone = 1.0 / 3.0;

struct Header {
    uint16_t flags = 0;
    int width = 0, height = 0;
    int qp = 32;
    PartitionConfig partition;
    uint64_t digest = 0;
};

void write_header(std::vector<uint8_t>& out, const Header& h) {
    out.insert(out.end(), kMagic, kMagic + 4);
    auto put16 = [&](uint16_t v) {
        out.push_back(uint8_t(v));
        out.push_back(uint8_t(v >> 8));
    };
    auto put32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
    };
    put16(kVersion);
    put16(h.flags);
    put32(uint32_t(h.width));
    put32(uint32_t(h.height));
    out.push_back(uint8_t(h.qp));
    out.push_back(h.partition.mode == PartitionConfig::Mode::Fixed ? 0 : 1);
    out.push_back(uint8_t(h.partition.fixedSize));
    out.push_back(0);
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(h.digest >> (8 * i)));
}

constexpr size_t kHeaderSize = 4 + 2 + 2 + 4 + 4 + 4 + 8;

Header read_header(std::span<const uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) throw TruncatedInput("bitstream shorter than header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw StreamMismatch("bad bitstream magic");
    auto get16 = [&](size_t o) { return uint16_t(bytes[o] | bytes[o + 1] << 8); };
    auto get32 = [&](size_t o) {
        return uint32_t(bytes[o]) | uint32_t(bytes[o + 1]) << 8 | uint32_t(bytes[o + 2]) << 16 |
               uint32_t(bytes[o + 3]) << 24;
    };
    if (get16(4) != kVersion) throw StreamMismatch("unknown bitstream version");
    Header h;
    h.flags = get16(6);
    h.width = int(get32(8));
    h.height = int(get32(12));
    h.qp = bytes[16];
    h.partition.mode = bytes[17] == 0 ? PartitionConfig::Mode::Fixed : PartitionConfig::Mode::RdQuad;
    h.partition.fixedSize = bytes[18];
    h.digest = 0;
    for (int i = 0; i < 8; ++i) h.digest |= uint64_t(bytes[20 + size_t(i)]) << (8 * i);
    return h;
}

// Residual pipeline for one candidate: transform, quantize, count exact
// exp-Golomb bits, reconstruct, measure distortion.
struct ResidualEval {
    std::vector<int32_t> levels;
    std::vector<uint8_t> recon;
    uint64_t distortion = 0;
    int residBits = 0;
};

ResidualEval eval_residual(const Frame& src, const Rect& r, const std::vector<uint8_t>& pred,
                           double qstep) {
    const int n = r.w * r.h;
    std::vector<double> res(size_t(n), 0.0), coeff(size_t(n), 0.0);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            res[size_t(y) * r.w + x] =
                double(src.at(r.x + x, r.y + y)) - double(pred[size_t(y) * r.w + x]);
    dct2_forward(res.data(), r.w, r.h, coeff.data());

    ResidualEval out;
    out.levels.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        const double c = coeff[size_t(i)];
        const int32_t q = int32_t((c >= 0 ? 1 : -1) * std::floor(std::abs(c) / qstep + kDeadZone));
        out.levels[size_t(i)] = q;
        out.residBits += se_bit_length(q);
        coeff[size_t(i)] = double(q) * qstep;
    }
    std::vector<double> rec(size_t(n), 0.0);
    dct2_inverse(coeff.data(), r.w, r.h, rec.data());
    out.recon.resize(size_t(n));
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) {
            const long v = std::lround(double(pred[size_t(y) * r.w + x]) + rec[size_t(y) * r.w + x]);
            const uint8_t s = uint8_t(std::clamp(v, 0l, 255l));
            out.recon[size_t(y) * r.w + x] = s;
            const int64_t d = int64_t(src.at(r.x + x, r.y + y)) - int64_t(s);
            out.distortion += uint64_t(d * d);
        }
    return out;
}

struct BlockDecision {
    bool usedDlimd = false;
    int mode = 0;
    ResidualEval rd;
    int modeBits = 0;
    int flagBits = 0;
    double cost = 0;
};

struct CoderState {
    const Frame* src = nullptr;
    ReconBuffer recon;
    RdConfig cfg;
    double lambda = 0;
    double qstep = 0;
    const nn::NetworkF* net = nullptr;
    mutable nn::Workspace<float> ws;
};

MpmList mpm_for(const CoderState& st, const Rect& r) {
    const int left = st.recon.coded(r.x - 1, r.y + r.h - 1) ? st.recon.mode_at(r.x - 1, r.y + r.h - 1)
                                                            : kPlanarMode;
    const int above = st.recon.coded(r.x + r.w - 1, r.y - 1) ? st.recon.mode_at(r.x + r.w - 1, r.y - 1)
                                                             : kPlanarMode;
    return derive_mpm(left, above);
}

// Derivation-side features; always reconstruction-fed so the decoder mirrors
// them exactly.
int derive_mode(const CoderState& st, const Rect& r, const ReferenceLines& refs) {
    const ReferenceCanvas canvas = build_canvas(refs, r.w, r.h);
    const auto hist = gradient_histogram(st.recon, r);
    const auto nbrs = neighbor_modes(st.recon, r);
    const auto f0 = assemble_features(hist, nbrs, st.cfg.qp);
    st.net->forward(canvas.data(), f0.data(), st.ws, nn::DropoutPlan{});
    const std::vector<float>& p = st.ws.fcOut[4];
    int best = 0;
    for (int j = 1; j < nn::kNumClasses; ++j)
        if (p[size_t(j)] > p[size_t(best)]) best = j;
    return best;
}

BlockDecision decide_block(const CoderState& st, const Rect& r) {
    const ReferenceLines refs = build_reference(st.recon, r);
    const MpmList mpm = mpm_for(st, r);
    const int flagBits = st.cfg.dlimdEnabled ? 1 : 0;

    BlockDecision best;
    best.cost = std::numeric_limits<double>::infinity();
    for (int mode = 0; mode < kNumIntraModes; ++mode) {
        const std::vector<uint8_t> pred = predict(mode, refs, r.w, r.h);
        ResidualEval rd = eval_residual(*st.src, r, pred, st.qstep);
        const int mBits = mode_bits(mode, mpm);
        const double cost = double(rd.distortion) + st.lambda * (rd.residBits + mBits + flagBits);
        if (cost < best.cost) {
            best.usedDlimd = false;
            best.mode = mode;
            best.rd = std::move(rd);
            best.modeBits = mBits;
            best.flagBits = flagBits;
            best.cost = cost;
        }
    }

    if (st.cfg.dlimdEnabled && !st.cfg.forceTraditional && st.net) {
        const int mode = derive_mode(st, r, refs);
        const std::vector<uint8_t> pred = predict(mode, refs, r.w, r.h);
        ResidualEval rd = eval_residual(*st.src, r, pred, st.qstep);
        const double cost = double(rd.distortion) + st.lambda * (rd.residBits + 0 + flagBits);
        if (cost < best.cost) {  // tie keeps the explicit path
            best.usedDlimd = true;
            best.mode = mode;
            best.rd = std::move(rd);
            best.modeBits = 0;
            best.flagBits = flagBits;
            best.cost = cost;
        }
    }
    return best;
}

void apply_decision(CoderState& st, const Rect& r, const BlockDecision& d) {
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            st.recon.set_sample(r.x + x, r.y + y, d.rd.recon[size_t(y) * r.w + x]);
    st.recon.mark_coded(r, uint8_t(d.mode));
}

struct RectKey {
    int x, y, w, h;
    bool operator<(const RectKey& o) const {
        return std::tie(x, y, w, h) < std::tie(o.x, o.y, o.w, o.h);
    }
};
RectKey key(const Rect& r) { return {r.x, r.y, r.w, r.h}; }

struct SearchTree {
    std::map<RectKey, bool> split;
    std::map<RectKey, BlockDecision> leaves;
};

double search_node(CoderState& st, const Rect& node, SearchTree& tree) {
    const bool inside = node.x + node.w <= st.src->width && node.y + node.h <= st.src->height;
    if (!inside) {
        // implicit split, no flag cost
        double cost = 0;
        const int hw = node.w / 2, hh = node.h / 2;
        const Rect children[4] = {{node.x, node.y, hw, hh},
                                  {node.x + hw, node.y, hw, hh},
                                  {node.x, node.y + hh, hw, hh},
                                  {node.x + hw, node.y + hh, hw, hh}};
        for (const Rect& c : children) {
            if (c.x >= st.src->width || c.y >= st.src->height) continue;
            cost += search_node(st, c, tree);
        }
        return cost;
    }
    const bool canSplit = node.w > 4 && node.h > 4;
    const ReconBuffer::Snapshot before = st.recon.save(node);
    BlockDecision dec = decide_block(st, node);
    apply_decision(st, node, dec);
    const double costSingle = dec.cost + (canSplit ? st.lambda : 0.0);
    if (!canSplit) {
        tree.leaves[key(node)] = std::move(dec);
        return costSingle;
    }
    const ReconBuffer::Snapshot single = st.recon.save(node);
    st.recon.restore(before);

    SearchTree childTree;
    double costSplit = st.lambda;  // split flag bit
    const int hw = node.w / 2, hh = node.h / 2;
    const Rect children[4] = {{node.x, node.y, hw, hh},
                              {node.x + hw, node.y, hw, hh},
                              {node.x, node.y + hh, hw, hh},
                              {node.x + hw, node.y + hh, hw, hh}};
    for (const Rect& c : children) costSplit += search_node(st, c, childTree);

    if (costSplit < costSingle) {
        tree.split[key(node)] = true;
        tree.split.insert(childTree.split.begin(), childTree.split.end());
        for (auto& [k, v] : childTree.leaves) tree.leaves[k] = std::move(v);
        return costSplit;
    }
    st.recon.restore(single);
    tree.split[key(node)] = false;
    tree.leaves[key(node)] = std::move(dec);
    return costSingle;
}

void commit_leaf(CoderState& st, const Rect& r, const BlockDecision& d, BitWriter& bw,
                 std::vector<TraceEntry>& trace, const SampleSink& sink) {
    if (sink) {
        // Features exactly as the derivation path would see them, except the
        // extraction-time source switch.
        const Frame* featSrc = st.cfg.refSourcePixels ? st.src : nullptr;
        const ReferenceLines refs = build_reference(st.recon, r, featSrc);
        const ReferenceCanvas canvas = build_canvas(refs, r.w, r.h);
        const auto hist = gradient_histogram(st.recon, r, featSrc);
        const auto nbrs = neighbor_modes(st.recon, r);
        sink(canvas, assemble_features(hist, nbrs, st.cfg.qp), d.mode, r);
    }
    if (st.cfg.dlimdEnabled) bw.put(d.usedDlimd ? 1 : 0, 1);
    if (!d.usedDlimd) {
        const ModeCode mc = encode_mode(d.mode, mpm_for(st, r));
        bw.put(mc.bits, mc.length);
    }
    for (int32_t lv : d.rd.levels) bw.put_se(lv);

    TraceEntry e;
    e.x = r.x;
    e.y = r.y;
    e.w = r.w;
    e.h = r.h;
    e.mode = d.mode;
    e.usedDlimd = d.usedDlimd;
    e.modeBits = d.modeBits;
    e.flagBits = d.flagBits;
    e.residBits = d.rd.residBits;
    e.otherBits = 0;
    e.distortion = d.rd.distortion;
    trace.push_back(e);

    apply_decision(st, r, d);
}

}  // namespace

EncodeResult encode_frame(const Frame& frame, const RdConfig& cfg, const nn::NetworkF* net,
                          const SampleSink& sink) {
    if (frame.width <= 0 || frame.height <= 0 || frame.width % 4 != 0 || frame.height % 4 != 0)
        throw InvalidArgument("frame dimensions must be positive multiples of 4");
    if (cfg.qp < 0 || cfg.qp > 51) throw InvalidArgument("qp out of [0,51]");
    if (cfg.dlimdEnabled && !cfg.forceTraditional && !net)
        throw InvalidArgument("mode derivation enabled but no network loaded");

    CoderState st;
    st.src = &frame;
    st.recon = ReconBuffer(frame.width, frame.height);
    st.cfg = cfg;
    st.lambda = lambda_for_qp(cfg.qp);
    st.qstep = qstep_for_qp(cfg.qp);
    st.net = net;
    if (net) net->make_workspace(st.ws);

    Header h;
    h.flags = cfg.dlimdEnabled ? 1 : 0;
    h.width = frame.width;
    h.height = frame.height;
    h.qp = cfg.qp;
    h.partition = cfg.partition;
    h.digest = (cfg.dlimdEnabled && net) ? net->sourceDigest : 0;

    EncodeResult out;
    BitWriter bw;
    double leafCost = 0;
    uint64_t splitBits = 0;

    if (cfg.partition.mode == PartitionConfig::Mode::Fixed) {
        for (const Rect& r : partition_fixed(frame.width, frame.height, cfg.partition.fixedSize)) {
            BlockDecision d = decide_block(st, r);
            leafCost += d.cost;
            commit_leaf(st, r, d, bw, out.trace, sink);
        }
    } else {
        SearchTree tree;
        for (int y = 0; y < frame.height; y += 64)
            for (int x = 0; x < frame.width; x += 64) search_node(st, {x, y, 64, 64}, tree);
        // replay: fresh state, emit split flags and leaves in walker order
        st.recon = ReconBuffer(frame.width, frame.height);
        leafCost = 0;
        walk_quadtree(
            frame.width, frame.height,
            [&](const Rect& r) {
                const bool split = tree.split.at(key(r));
                bw.put(split ? 1 : 0, 1);
                ++splitBits;
                return split;
            },
            [&](const Rect& r) {
                const BlockDecision& d = tree.leaves.at(key(r));
                leafCost += d.cost;
                commit_leaf(st, r, d, bw, out.trace, sink);
            });
    }

    out.payloadBits = bw.bit_count();
    out.splitBits = splitBits;
    out.totalRdCost = leafCost + st.lambda * double(splitBits);

    std::vector<uint8_t> bytes;
    write_header(bytes, h);
    const std::vector<uint8_t> payload = bw.finish();
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    out.bitstream = std::move(bytes);

    out.recon.width = frame.width;
    out.recon.height = frame.height;
    out.recon.samples = st.recon.plane();
    return out;
}

DecodeResult decode_frame(std::span<const uint8_t> bytes, const nn::NetworkF* net) {
    const Header h = read_header(bytes);
    const bool dlimd = (h.flags & 1) != 0;
    if (dlimd && h.digest != 0) {
        if (!net) throw StreamMismatch("stream uses mode derivation but no network loaded");
        if (net->sourceDigest != h.digest) throw StreamMismatch("checkpoint digest mismatch");
    }

    CoderState st;
    Frame dummy;  // decoder has no source frame
    st.src = &dummy;
    st.recon = ReconBuffer(h.width, h.height);
    st.cfg.qp = h.qp;
    st.cfg.dlimdEnabled = dlimd;
    st.lambda = lambda_for_qp(h.qp);
    st.qstep = qstep_for_qp(h.qp);
    st.net = net;
    if (net) net->make_workspace(st.ws);

    BitReader br(bytes.subspan(kHeaderSize));
    DecodeResult out;

    auto decodeLeaf = [&](const Rect& r) {
        const ReferenceLines refs = build_reference(st.recon, r);
        bool usedDlimd = false;
        int mode;
        if (dlimd && br.get(1)) {
            if (!st.net) throw StreamMismatch("derivation flag set but no network loaded");
            usedDlimd = true;
            mode = derive_mode(st, r, refs);
            ++out.netInvocations;
        } else {
            mode = decode_mode(mpm_for(st, r), [&](int n) { return int(br.get(n)); });
        }
        const std::vector<uint8_t> pred = predict(mode, refs, r.w, r.h);
        const int n = r.w * r.h;
        std::vector<double> coeff(size_t(n), 0.0);
        for (int i = 0; i < n; ++i) coeff[size_t(i)] = double(br.get_se()) * st.qstep;
        std::vector<double> rec(size_t(n), 0.0);
        dct2_inverse(coeff.data(), r.w, r.h, rec.data());
        for (int y = 0; y < r.h; ++y)
            for (int x = 0; x < r.w; ++x) {
                const long v = std::lround(double(pred[size_t(y) * r.w + x]) + rec[size_t(y) * r.w + x]);
                st.recon.set_sample(r.x + x, r.y + y, uint8_t(std::clamp(v, 0l, 255l)));
            }
        st.recon.mark_coded(r, uint8_t(mode));

        TraceEntry e;
        e.x = r.x;
        e.y = r.y;
        e.w = r.w;
        e.h = r.h;
        e.mode = mode;
        e.usedDlimd = usedDlimd;
        out.trace.push_back(e);
    };

    if (h.partition.mode == PartitionConfig::Mode::Fixed) {
        for (const Rect& r : partition_fixed(h.width, h.height, h.partition.fixedSize)) decodeLeaf(r);
    } else {
        walk_quadtree(h.width, h.height, [&](const Rect&) { return br.get(1) != 0; }, decodeLeaf);
    }

    out.frame.width = h.width;
    out.frame.height = h.height;
    out.frame.samples = st.recon.plane();
    return out;
}

}  // namespace limd
