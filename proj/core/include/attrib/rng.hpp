#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace attrib {

/// 64-bit FNV-1a over raw bytes. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes);

/// Lower-case hex rendering of a 64-bit value (16 characters).
std::string hex64(std::uint64_t v);

/// Derives an independent seed for a named random substream.
///
/// Every random choice in a run flows from the manifest seed through a
/// (stream, key) pair, e.g. ("masking", "claim-17"), so adding a new
/// consumer never perturbs choices made elsewhere.
std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view stream, std::string_view key);

/// Deterministic engine for one substream.
std::mt19937_64 substream(std::uint64_t run_seed, std::string_view stream, std::string_view key);

/// Uniform integer in [0, n) from raw engine output. Unlike
/// std::uniform_int_distribution the result is identical on every standard
/// library, which keeps committed golden files portable.
std::size_t uniform_index(std::mt19937_64& engine, std::size_t n);

}  // namespace attrib
