#include "signlab/seed.hpp"

namespace signlab {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t seed_spawn(std::uint64_t base_seed, std::uint64_t run_index) {
  return mix64(mix64(base_seed) + run_index);
}

}  // namespace signlab
