#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace mqud::util {

std::string sha256_hex(std::string_view data);

/// "sha256:<hex>" content address used for assets and outputs.
std::string content_hash(std::string_view data);

/// Hash of parts joined by the unit separator (0x1f), so ("ab","c") != ("a","bc").
std::string hash_parts(std::initializer_list<std::string_view> parts);

std::string base64_encode(std::string_view data);

/// SplitMix64 finalizer; derives independent stream seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// First 8 bytes of sha256 as an integer, for deterministic pseudo-random choices.
std::uint64_t stable_u64(std::string_view data);

}  // namespace mqud::util
