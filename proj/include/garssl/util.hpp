#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace garssl {

// 64-bit FNV-1a. Stable across platforms; used for request/cache digests,
// not for anything adversarial.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(uint64_t value);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Fixed-point percentage rendering for report tables, e.g. 0.8333 -> "83.3".
std::string format_percent(double ratio, int decimals = 1);

}  // namespace garssl
