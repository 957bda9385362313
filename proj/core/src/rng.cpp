#include "attrib/rng.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace attrib {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view stream, std::string_view key) {
    std::uint64_t h = splitmix64(run_seed);
    h = splitmix64(h ^ fnv1a64(stream));
    return splitmix64(h ^ fnv1a64(key));
}

std::mt19937_64 substream(std::uint64_t run_seed, std::string_view stream, std::string_view key) {
    return std::mt19937_64(substream_seed(run_seed, stream, key));
}

std::size_t uniform_index(std::mt19937_64& engine, std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

}  // namespace attrib
