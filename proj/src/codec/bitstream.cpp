#include "limd/codec/bitstream.hpp"

namespace limd {

void BitWriter::put(uint32_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) {
        cur_ = uint8_t((cur_ << 1) | ((value >> i) & 1));
        if (++fill_ == 8) {
            bytes_.push_back(cur_);
            cur_ = 0;
            fill_ = 0;
        }
    }
    bits_ += size_t(bits);
}

void BitWriter::put_ue(uint32_t v) {
    const uint64_t n = uint64_t(v) + 1;
    int len = 0;
    while ((n >> len) > 1) ++len;
    put(0, len);
    put(uint32_t(n), len + 1);
}

void BitWriter::put_se(int32_t v) {
    const uint32_t n = v == 0 ? 0 : (v > 0 ? uint32_t(2 * int64_t(v) - 1) : uint32_t(-2 * int64_t(v)));
    put_ue(n);
}

std::vector<uint8_t> BitWriter::finish() {
    if (fill_ > 0) {
        bytes_.push_back(uint8_t(cur_ << (8 - fill_)));
        cur_ = 0;
        fill_ = 0;
    }
    return std::move(bytes_);
}

uint32_t BitReader::get(int bits) {
    uint32_t v = 0;
    for (int i = 0; i < bits; ++i) {
        const size_t byte = pos_ >> 3;
        if (byte >= data_.size()) throw TruncatedInput("bitstream exhausted");
        v = (v << 1) | ((data_[byte] >> (7 - (pos_ & 7))) & 1);
        ++pos_;
    }
    return v;
}

uint32_t BitReader::get_ue() {
    int len = 0;
    while (get(1) == 0) {
        if (++len > 32) throw TruncatedInput("malformed exp-golomb code");
    }
    uint32_t v = 1;
    for (int i = 0; i < len; ++i) v = (v << 1) | get(1);
    return v - 1;
}

int32_t BitReader::get_se() {
    const uint32_t n = get_ue();
    if (n == 0) return 0;
    return (n & 1) ? int32_t((n + 1) / 2) : -int32_t(n / 2);
}

int se_bit_length(int32_t v) {
    const uint64_t n = (v == 0 ? 0 : (v > 0 ? uint64_t(2 * int64_t(v) - 1) : uint64_t(-2 * int64_t(v)))) + 1;
    int len = 0;
    while ((n >> len) > 1) ++len;
    return 2 * len + 1;
}

}  // namespace limd
