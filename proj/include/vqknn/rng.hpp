#pragma once

#include "vqknn/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace vqknn {

// Deterministic random source. Wraps a 64-bit Mersenne twister but maps raw
// bits to doubles explicitly, so draws do not depend on the standard
// library's distribution implementations. Identical seeds give identical
// streams on every build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(split_mix(seed)) {}

  // Derives an independent stream; stream ids keep subsystems (data, init,
  // training, eval) decoupled so adding draws in one does not shift another.
  Rng derive(std::uint64_t stream) const {
    return Rng(split_mix(seed_ ^ split_mix(stream * 0x9e3779b97f4a7c15ull + 0x3c6ef372fe94f82bull)));
  }

  // Uniform on [0, 1) with 53 random bits.
  Real uniform() { return static_cast<Real>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (lo, hi).
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one draw per call, cached pair discarded
  // deliberately to keep the call count predictable.
  Real normal() {
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    check(n > 0, "Rng::uniform_int: n must be positive");
    // Rejection sampling removes modulo bias.
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return static_cast<int>(x % bound);
  }

  // k distinct values from [0, n), ascending.
  std::vector<int> sample_without_replacement(int n, int k) {
    check(k >= 0 && k <= n, "Rng::sample_without_replacement: need 0 <= k <= n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // Fisher-Yates permutation of [0, n).
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[uniform_int(i + 1)]);
    return p;
  }

  Mat normal_matrix(Eigen::Index rows, Eigen::Index cols, Real scale = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal();
    return m;
  }

  Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, Real lo = 0.0, Real hi = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

 private:
  static std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // xoshiro-style output over splitmix-advanced state; small, fast, and
  // fully specified here rather than delegated to the standard library.
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_ = 0;
  std::uint64_t state_;
};

}  // namespace vqknn
