#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace limd {

// Error taxonomy shared by every module. The CLI maps these onto one-line
// diagnostics and a nonzero exit status.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidArgument : Error {
    using Error::Error;
};
struct TruncatedInput : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct CorruptDataset : Error {
    using Error::Error;
};
struct DeficitError : Error {
    using Error::Error;
};
struct StreamMismatch : Error {
    using Error::Error;
};
struct InvalidParams : Error {
    using Error::Error;
};
struct TrainingDiverged : Error {
    using Error::Error;
};

// FNV-1a, used for checkpoint/dataset digests and replay-determinism checks.
inline uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Counter-style mixer: derives independent deterministic streams (per-sample
// dropout masks, per-cell subsampling) from one user-facing seed.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

}  // namespace limd
