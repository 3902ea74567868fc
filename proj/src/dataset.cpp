#include "limd/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <random>

#include "limd/codec/codec.hpp"

namespace limd {

namespace {

constexpr char kMagic[8] = {'L', 'I', 'M', 'D', 'D', 'S', 'T', '1'};
constexpr uint32_t kVersion = 1;
constexpr size_t kRecordBytes = (kCanvasSize + kHandcraftedDim) * 4 + 4;

void encode_record(const SampleRecord& r, uint8_t* out) {
    std::memcpy(out, r.canvas.data(), kCanvasSize * 4);
    std::memcpy(out + kCanvasSize * 4, r.f0.data(), kHandcraftedDim * 4);
    uint8_t* tail = out + (kCanvasSize + kHandcraftedDim) * 4;
    tail[0] = r.label;
    tail[1] = r.qp;
    tail[2] = r.w;
    tail[3] = r.h;
}

SampleRecord decode_record(const uint8_t* in) {
    SampleRecord r;
    std::memcpy(r.canvas.data(), in, kCanvasSize * 4);
    std::memcpy(r.f0.data(), in + kCanvasSize * 4, kHandcraftedDim * 4);
    const uint8_t* tail = in + (kCanvasSize + kHandcraftedDim) * 4;
    r.label = tail[0];
    r.qp = tail[1];
    r.w = tail[2];
    r.h = tail[3];
    if (r.label >= 67) throw CorruptDataset("record label out of range");
    return r;
}

void write_all(const std::string& path, const std::vector<SampleRecord>& records, bool append) {
    std::vector<SampleRecord> existing;
    if (append) {
        std::ifstream probe(path, std::ios::binary);
        if (probe) existing = read_dataset(path);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write dataset " + path);
    f.write(kMagic, 8);
    uint32_t version = kVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const uint64_t count = existing.size() + records.size();
    f.write(reinterpret_cast<const char*>(&count), 8);
    std::vector<uint8_t> buf(kRecordBytes);
    const std::vector<SampleRecord>* sets[2] = {&existing, &records};
    for (const auto* set : sets)
        for (const SampleRecord& r : *set) {
            encode_record(r, buf.data());
            f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
        }
    if (!f) throw Error("short dataset write " + path);
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<SampleRecord>& records) {
    write_all(path, records, false);
}

void append_dataset(const std::string& path, const std::vector<SampleRecord>& records) {
    write_all(path, records, true);
}

std::vector<SampleRecord> read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw TruncatedInput("cannot open dataset " + path);
    const size_t size = size_t(f.tellg());
    f.seekg(0);
    if (size < 20) throw TruncatedInput("dataset shorter than header");
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw CorruptDataset("bad dataset magic in " + path);
    uint32_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion) throw CorruptDataset("unknown dataset version");
    uint64_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 8);
    if (size < 20 + count * kRecordBytes) throw TruncatedInput("dataset truncated: " + path);
    std::vector<SampleRecord> out;
    out.reserve(size_t(count));
    std::vector<uint8_t> buf(kRecordBytes);
    for (uint64_t i = 0; i < count; ++i) {
        f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        out.push_back(decode_record(buf.data()));
    }
    return out;
}

ExtractSummary extract_samples(const ExtractConfig& cfg) {
    if (cfg.inputs.empty()) throw InvalidArgument("no input frames");
    ExtractSummary summary;
    std::vector<SampleRecord> records;
    for (const std::string& path : cfg.inputs) {
        const Frame frame = cfg.pnm ? load_frame(path, 0, 0, FrameFormat::PortablePixmap)
                                    : load_frame(path, cfg.width, cfg.height, FrameFormat::Raw420Luma);
        for (int qp : cfg.qps) {
            RdConfig rd;
            rd.qp = qp;
            rd.partition = cfg.partition;
            rd.dlimdEnabled = false;  // labels come from the explicit RD sweep
            rd.refSourcePixels = cfg.refSourcePixels;
            SampleSink sink = [&](const ReferenceCanvas& canvas,
                                  const std::array<float, kHandcraftedDim>& f0, int mode,
                                  const Rect& r) {
                SampleRecord rec;
                rec.canvas = canvas;
                rec.f0 = f0;
                rec.label = uint8_t(mode);
                rec.qp = uint8_t(qp);
                rec.w = uint8_t(r.w);
                rec.h = uint8_t(r.h);
                records.push_back(rec);
                summary.perLabel[size_t(mode)] += 1;
            };
            encode_frame(frame, rd, nullptr, sink);
        }
    }
    summary.records = records.size();
    write_dataset(cfg.out, records);
    return summary;
}

std::vector<SampleRecord> balance(const std::vector<SampleRecord>& in, size_t perLabelPerQp,
                                  uint64_t seed) {
    std::map<std::pair<int, int>, std::vector<size_t>> cells;
    std::set<int> qps, labels;
    for (size_t i = 0; i < in.size(); ++i) {
        cells[{in[i].label, in[i].qp}].push_back(i);
        qps.insert(in[i].qp);
        labels.insert(in[i].label);
    }
    // the full grid of labels present x qps present must be coverable
    for (int label : labels)
        for (int qp : qps) cells[{label, qp}];

    std::string deficits;
    for (const auto& [cell, idx] : cells)
        if (idx.size() < perLabelPerQp)
            deficits += " (label " + std::to_string(cell.first) + ", qp " + std::to_string(cell.second) +
                        ": " + std::to_string(idx.size()) + "/" + std::to_string(perLabelPerQp) + ")";
    if (!deficits.empty()) throw DeficitError("balance deficit:" + deficits);

    std::vector<SampleRecord> out;
    for (auto& [cell, idx] : cells) {
        std::mt19937_64 rng(mix64(seed, uint64_t(cell.first) << 8 | uint64_t(cell.second)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t i = 0; i < perLabelPerQp; ++i) out.push_back(in[idx[i]]);
    }
    std::mt19937_64 rng(mix64(seed, 0x5u));
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_validation(
    const std::vector<SampleRecord>& in, size_t perLabel, uint64_t seed) {
    std::map<int, std::vector<size_t>> byLabel;
    for (size_t i = 0; i < in.size(); ++i) byLabel[in[i].label].push_back(i);

    std::string deficits;
    for (const auto& [label, idx] : byLabel)
        if (idx.size() < perLabel)
            deficits += " (label " + std::to_string(label) + ": " + std::to_string(idx.size()) + "/" +
                        std::to_string(perLabel) + ")";
    if (!deficits.empty()) throw DeficitError("validation split deficit:" + deficits);

    std::vector<bool> inVal(in.size(), false);
    for (auto& [label, idx] : byLabel) {
        std::mt19937_64 rng(mix64(seed, uint64_t(label) | 0xa100u));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t i = 0; i < perLabel; ++i) inVal[idx[i]] = true;
    }
    std::vector<SampleRecord> train, val;
    for (size_t i = 0; i < in.size(); ++i) (inVal[i] ? val : train).push_back(in[i]);
    return {std::move(train), std::move(val)};
}

uint64_t record_digest(const SampleRecord& r) {
    std::vector<uint8_t> buf(kRecordBytes);
    encode_record(r, buf.data());
    return fnv1a64(buf);
}

}  // namespace limd
