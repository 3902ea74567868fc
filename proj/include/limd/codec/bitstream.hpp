#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "limd/common.hpp"

namespace limd {

// MSB-first bit writer/reader with order-0 exponential-Golomb codes.
class BitWriter {
public:
    void put(uint32_t value, int bits);
    void put_ue(uint32_t v);
    void put_se(int32_t v);
    size_t bit_count() const { return bits_; }
    std::vector<uint8_t> finish();  // pads the last byte with zeros

private:
    std::vector<uint8_t> bytes_;
    uint8_t cur_ = 0;
    int fill_ = 0;
    size_t bits_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const uint8_t> bytes) : data_(bytes) {}
    uint32_t get(int bits);
    uint32_t get_ue();
    int32_t get_se();
    size_t bits_consumed() const { return pos_; }

private:
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

// Code length of the signed order-0 exp-Golomb code for v.
int se_bit_length(int32_t v);

}  // namespace limd
