#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bread {

inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

/// 16-hex-digit content hash used for prompt ids, request keys and transcript
/// digests. Request-key collisions are detected by comparing the stored full
/// request, so 64 bits is enough.
inline std::string digest(std::string_view data) { return hex64(fnv1a64(data)); }

}  // namespace bread
