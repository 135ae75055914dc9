#pragma once

#include <cstdint>
#include <random>

namespace trisk {

using Engine = std::mt19937_64;

// Stream tags keep the sub-streams of one master seed disjoint.
enum class StreamTag : std::uint64_t {
  innovation_column = 1,
  copula_node = 2,
  cell_subsample = 3,
  bootstrap = 4,
  synthetic = 5,
  tree_pool = 6,
};

std::uint64_t splitmix64(std::uint64_t& state);

// Hash (master, tag, index) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0);

inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(tag), index);
}

inline Engine make_stream(std::uint64_t master, StreamTag tag, std::uint64_t index = 0) {
  return Engine(derive_seed(master, tag, index));
}

}  // namespace trisk
