#pragma once

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard. The std distributions are not
// portable, so the transforms below are spelled out:
//
//   uniform_below(n): draw x, reject while x < (2^64 - n) mod n, return x mod n
//   uniform01():      (x >> 11) * 2^-53, in [0, 1)
//   normal():         Box-Muller on u1 = 1 - uniform01(), u2 = uniform01(),
//                     returning the cosine branch then the cached sine branch
//
// Any implementation following these rules reproduces the same index
// streams (episode sampling only uses uniform_below).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bel {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_below: n must be > 0");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// In-place Fisher-Yates over the whole range, back to front.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// First m entries of a front-to-back partial Fisher-Yates over v.
  template <class T>
  std::vector<T> choose(std::vector<T> v, std::size_t m) {
    if (m > v.size()) throw std::invalid_argument("Rng::choose: not enough items");
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + uniform_below(v.size() - i);
      std::swap(v[i], v[j]);
    }
    v.resize(m);
    return v;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bel
