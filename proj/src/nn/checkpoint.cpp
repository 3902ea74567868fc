#include "limd/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace limd::nn {

namespace {

constexpr char kMagic[8] = {'L', 'I', 'M', 'D', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

void save_checkpoint(const std::string& path, Network<float>& net) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, kVersion);
    const std::string& tag = net.config().tag;
    out.push_back(uint8_t(tag.size()));
    out.insert(out.end(), tag.begin(), tag.end());

    uint32_t count = 0;
    net.for_each_param([&](const std::string&, std::vector<float>&, bool, int, int, int) { ++count; });
    put_u32(out, count);
    net.for_each_param([&](const std::string& name, std::vector<float>& t, bool, int, int, int) {
        out.push_back(uint8_t(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, uint32_t(t.size()));
        const size_t pos = out.size();
        out.resize(pos + t.size() * 4);
        std::memcpy(out.data() + pos, t.data(), t.size() * 4);
    });

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write checkpoint " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw Error("short checkpoint write " + path);
}

Network<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw TruncatedInput("cannot open checkpoint " + path);
    std::vector<uint8_t> buf(size_t(f.tellg()));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));

    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > buf.size()) throw TruncatedInput("truncated checkpoint " + path);
    };
    need(8 + 4);
    if (std::memcmp(buf.data(), kMagic, 8) != 0) throw StreamMismatch("bad checkpoint magic in " + path);
    pos = 8;
    if (get_u32(buf.data() + pos) != kVersion) throw StreamMismatch("unknown checkpoint version in " + path);
    pos += 4;
    need(1);
    const size_t tagLen = buf[pos++];
    need(tagLen);
    const std::string tag(reinterpret_cast<const char*>(buf.data() + pos), tagLen);
    pos += tagLen;

    Network<float> net{VariantConfig::named(tag)};
    need(4);
    const uint32_t count = get_u32(buf.data() + pos);
    pos += 4;

    uint32_t seen = 0;
    net.for_each_param([&](const std::string& name, std::vector<float>& t, bool, int, int, int) {
        need(1);
        const size_t nameLen = buf[pos++];
        need(nameLen);
        const std::string stored(reinterpret_cast<const char*>(buf.data() + pos), nameLen);
        pos += nameLen;
        if (stored != name) throw StreamMismatch("checkpoint tensor order mismatch: " + stored);
        need(4);
        const uint32_t n = get_u32(buf.data() + pos);
        pos += 4;
        if (n != t.size()) throw InvalidParams("checkpoint tensor size mismatch for " + name);
        need(size_t(n) * 4);
        std::memcpy(t.data(), buf.data() + pos, size_t(n) * 4);
        pos += size_t(n) * 4;
        ++seen;
    });
    if (seen != count) throw StreamMismatch("checkpoint tensor count mismatch");
    net.refresh_transposed();
    net.sourceDigest = fnv1a64(buf);
    return net;
}

uint64_t file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw TruncatedInput("cannot open " + path);
    std::vector<uint8_t> buf(size_t(f.tellg()));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    return fnv1a64(buf);
}

}  // namespace limd::nn
