#pragma once

#include <cstdint>
#include <cmath>

namespace rmlab {

// Counter-based generator: the i-th draw of a stream is a pure function of
// (key, i), so streams can be split and replayed independently of call order.
class Rng {
public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t at(std::uint64_t i) const {
    return mix(mix(key_ + 0x9e3779b97f4a7c15ull * (i + 1)) ^ 0xa0761d6478bd642full);
  }

  std::uint64_t next_u64() { return at(counter_++); }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; avoids stdlib distributions so streams are reproducible
  // across implementations.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // independent child stream; deterministic in (parent key, id)
  Rng fork(std::uint64_t id) const {
    return Rng(mix(key_ ^ (0x517cc1b727220a95ull + 0x2545f4914f6cdd1dull * id)));
  }

  std::uint64_t key() const { return key_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rmlab
