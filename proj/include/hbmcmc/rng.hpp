#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace hbmcmc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-chain stream: hash(seed, chain_id). Chains sharing a seed but not a
/// chain_id get unrelated streams.
inline Rng make_stream(std::uint64_t seed, std::uint64_t chain_id) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(chain_id + 0x632be59bd9b4e019ULL)));
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace hbmcmc
