#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace psyphy {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix64(base ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t stream_seed(std::uint64_t base, std::string_view name) noexcept {
    return stream_seed(base, fnv1a(name));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

// Uniform double in [0,1) from the top 53 bits; unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection, portable across standard libraries.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t v;
    do {
        v = eng();
    } while (v >= limit);
    return v % n;
}

// Box-Muller; one draw per call, so the stream position is predictable.
double standard_normal(Engine& eng);

template <typename Container>
void shuffle(Container& c, Engine& eng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
        using std::swap;
        swap(c[i - 1], c[j]);
    }
}

}  // namespace psyphy
