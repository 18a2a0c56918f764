#pragma once

#include <cstdint>

namespace siamman {

// splitmix64 generator. Every source of randomness in the project goes
// through this class so seeded runs are bit-reproducible; std:: distributions
// are avoided because their outputs differ across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller
  double normal();

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // independent substream keyed on this stream's state and a tag
  Rng fork(std::uint64_t tag) {
    Rng r(state_ ^ (0x632be59bd9b4e019ull * (tag + 1)));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// stateless hash for procedural textures
std::uint64_t hash2(std::uint64_t a, std::uint64_t b);
double hash_unit(std::uint64_t a, std::uint64_t b);  // [0,1)

}  // namespace siamman
