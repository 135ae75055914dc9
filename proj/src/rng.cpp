#include "trisk/rng.h"

namespace trisk {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t state = master;
  std::uint64_t a = splitmix64(state);
  state = a ^ (tag * 0xd1b54a32d192ed03ULL);
  std::uint64_t b = splitmix64(state);
  state = b ^ (index * 0xaef17502108ef2d9ULL);
  return splitmix64(state);
}

}  // namespace trisk
