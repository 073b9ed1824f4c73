#pragma once

#include <cstdint>
#include <random>

namespace mdn {

/// splitmix64 mixing step; used to derive independent sub-seeds from one
/// run seed so that e.g. weight init and batch shuffling never share a stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix_seed(seed ^ mix_seed(stream));
}

inline std::mt19937 make_engine(std::uint64_t seed) {
    return std::mt19937(static_cast<std::uint32_t>(mix_seed(seed) >> 16));
}

inline std::mt19937 make_engine(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937(static_cast<std::uint32_t>(mix_seed(seed, stream) >> 16));
}

}  // namespace mdn
