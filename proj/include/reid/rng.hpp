#ifndef REID_RNG_HPP_
#define REID_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace reid {

// Deterministic RNG used by every stochastic component. The mapping from
// raw engine output to doubles is spelled out here instead of going through
// std distributions so that identical seeds give identical streams on any
// platform (metric reports must be byte-reproducible).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  int below(int n) { return static_cast<int>(engine_() % static_cast<uint64_t>(n)); }

  // standard normal via Box-Muller; second value intentionally discarded to
  // keep the stream position independent of call pairing
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = engine_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // derive an independent stream, e.g. one per pipeline stage
  Rng derive(uint64_t stream) {
    uint64_t x = engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27; x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::mt19937_64 engine_;
};

// stable 64-bit mix for deriving per-stage seeds from (master seed, tag)
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27; x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace reid

#endif  // REID_RNG_HPP_
