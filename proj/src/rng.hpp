#pragma once

#include <cstdint>
#include <random>

namespace fnbn {

// splitmix64; used to derive independent seed streams from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-job seed for a grid cell: base_seed XOR hash(config_id, repeat).
inline std::uint64_t job_seed(std::uint64_t base_seed, int config_id, int repeat) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(config_id) * 0x100000001b3ULL +
                               static_cast<std::uint64_t>(repeat) + 0x9e3779b9ULL);
  return base_seed ^ h;
}

using Rng = std::mt19937_64;

// lambda ~ Beta(alpha, alpha) via two gamma draws.
inline double beta_sample(double alpha, Rng& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  double a = g(rng);
  double b = g(rng);
  double s = a + b;
  if (s <= 0.0) return 0.5;
  return a / s;
}

}  // namespace fnbn
