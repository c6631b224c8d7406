#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lcsens {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent generator for one (seed, key...) combination, so results do
/// not depend on the order in which units are processed.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view tag, std::string_view a = {},
                                 std::string_view b = {}) {
    std::uint64_t h = fnv1a(tag);
    h = fnv1a("\x1f", h);
    h = fnv1a(a, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(b, h);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(splitmix64(seed ^ h))};
    return std::mt19937_64(seq);
}

}  // namespace lcsens
