#pragma once

#include <cstdint>
#include <random>

namespace alsrec {

// SplitMix64 finalizer. Used to derive independent stream seeds from
// (seed, stream, row) so per-row draws do not depend on visiting order.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t row) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ row);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t row) {
  return std::mt19937_64(derive_seed(seed, stream, row));
}

}  // namespace alsrec
