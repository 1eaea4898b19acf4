#pragma once

#include <cstdint>
#include <random>

namespace icsim {

/// Stream tags keep seeds derived for different purposes disjoint even
/// when their indices collide.
enum class Stream : std::uint64_t {
  MaskAcquisition = 1,
  PixelNoise = 2,
  SenseTrial = 3,
  Generic = 4,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent engine seed from (run seed, stream, index).
/// The derivation is a pure function, so work items can be evaluated in
/// any order or on any worker and still draw identical variates.
inline std::uint64_t derive_seed(std::uint64_t run_seed, Stream stream, std::uint64_t index) {
  std::uint64_t h = detail::splitmix64(run_seed);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = detail::splitmix64(h ^ index);
  return h;
}

inline std::mt19937_64 make_engine(std::uint64_t run_seed, Stream stream, std::uint64_t index) {
  return std::mt19937_64(derive_seed(run_seed, stream, index));
}

}  // namespace icsim
