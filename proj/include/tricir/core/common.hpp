#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace tricir {

// Row-major dense matrix; rows index samples/nodes, columns index features.
template <typename S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = MatR<float>;
using MatD = MatR<double>;

// FNV-1a, used for token hashing and seed derivation.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic uniform double in [0,1) from a splitmix64 stream.
inline double unit_uniform(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

// Box-Muller normal deviate driven by splitmix64; deterministic across platforms.
inline double unit_normal(std::uint64_t& state) {
  double u1 = 0.0;
  while (u1 <= 1e-300) u1 = unit_uniform(state);
  double u2 = unit_uniform(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Sum with 64-bit accumulation regardless of the stored scalar.
template <typename Derived>
double dsum(const Eigen::MatrixBase<Derived>& m) {
  return m.template cast<double>().sum();
}

template <typename Derived>
double dsquared_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.template cast<double>().squaredNorm();
}

}  // namespace tricir
