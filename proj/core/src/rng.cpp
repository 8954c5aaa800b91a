#include "bread/rng.hpp"

#include "bread/hash.hpp"

namespace bread {

uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t a, uint64_t b) {
  uint64_t h = fnv1a64(label);
  char block[24];
  uint64_t words[3] = {base, a, b};
  for (int w = 0; w < 3; ++w)
    for (int i = 0; i < 8; ++i)
      block[w * 8 + i] = static_cast<char>((words[w] >> (8 * i)) & 0xff);
  h = fnv1a64(std::string_view(block, sizeof(block)), h);
  // Finalize through one SplitMix64 step so nearby inputs map far apart.
  return Rng(h).next_u64();
}

}  // namespace bread
