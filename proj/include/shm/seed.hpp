#pragma once

#include <cstdint>
#include <initializer_list>

namespace shm {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// integer labels (case id, channel index, purpose tag, ...).
///
/// seed_0 = mix64(master); seed_{i+1} = mix64(seed_i ^ mix64(label_i)).
/// The order of labels matters, so (case, channel) and (channel, case)
/// give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t s = mix64(master);
  for (auto l : labels) s = mix64(s ^ mix64(l));
  return s;
}

/// Purpose tags used as the last derive_seed label.
namespace stream {
inline constexpr std::uint64_t excitation = 1;
inline constexpr std::uint64_t sensor_noise = 2;
inline constexpr std::uint64_t frequency_noise = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t shuffle = 5;
}  // namespace stream

}  // namespace shm
