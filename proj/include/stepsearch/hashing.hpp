#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stepsearch {

/// 64-bit FNV-1a. Stable across platforms; used for replay keys, seeds and
/// config fingerprints, never for security.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Mixes an integer into a running hash.
std::uint64_t hash_combine(std::uint64_t hash, std::uint64_t value);

std::string hex64(std::uint64_t value);

/// Name-based (SHA-1, version 5) UUID; deterministic in `name`.
std::string name_uuid(std::string_view name);

}  // namespace stepsearch
