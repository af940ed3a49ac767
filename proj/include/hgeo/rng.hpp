#pragma once

#include <cstdint>
#include <random>

namespace hgeo {

using Rng = std::mt19937_64;

/// Deterministic RNG substream for (master seed, stream, substream), e.g. (seed, root, tree).
inline Rng make_substream(std::uint64_t master, std::uint64_t stream = 0, std::uint64_t sub = 0) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(master), hi(master), lo(stream), hi(stream), lo(sub), hi(sub), 0x68676571u};
  return Rng(seq);
}

}  // namespace hgeo
