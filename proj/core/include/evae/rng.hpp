#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace evae {

namespace detail {
// splitmix64 finalizer; used to decorrelate seeds derived from small integers.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d4a2c62a2fc35ull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic random stream with cheap splitting. A child stream is keyed
// by up to three tags hashed together with the parent's seed, so any unit of
// work (epoch, batch, replication) can own an independent generator whose
// output does not depend on how much the parent or siblings consumed.
// Uniform and normal variates are generated from raw engine words rather
// than std:: distributions, which keeps the byte stream identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t s = detail::mix64(seed_ ^ detail::mix64(a));
    s = detail::mix64(s ^ detail::mix64(b));
    s = detail::mix64(s ^ detail::mix64(c));
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the polar method. The spare value is cached, so a
  // stream of normals costs about one rejection loop per two variates.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Fisher-Yates index permutation, for epoch shuffles.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace evae
