#pragma once

// Counter-based seeding: every random stream is a pure function of
// (run seed, iteration, instance, purpose), so no generator state has to be
// carried across checkpoints.

#include <cstdint>
#include <random>

namespace sope::rng {

enum class Purpose : std::uint64_t {
  kReset = 1,
  kAction = 2,
  kMinibatch = 3,
  kInit = 4,
  kEval = 5,
  kTest = 6,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            Purpose purpose) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t v : {a, b, static_cast<std::uint64_t>(purpose)}) {
    s = h ^ v;
    h = splitmix64(s);
  }
  return h;
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              Purpose purpose) {
  return std::mt19937_64(derive(seed, a, b, purpose));
}

}  // namespace sope::rng
