// Self-contained deterministic RNG. std::mt19937_64 has a portable stream but
// the standard distributions do not, so uniform/normal draws are implemented
// by hand to keep datasets and training runs bit-reproducible across builds.
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace lipnovo {

class Rng {
public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    // SplitMix64 scramble so nearby seeds give unrelated streams.
    state_ = seed + 0x9e3779b97f4a7c15ULL;
    for (int i = 0; i < 4; ++i) next_u64();
    have_cached_normal_ = false;
  }

  // Derives an independent stream, e.g. Rng(seed).fork(epoch).fork(index).
  Rng fork(uint64_t salt) const {
    Rng child(state_ ^ (salt * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL));
    return child;
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_int(static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; caches the second draw.
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    have_cached_normal_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(static_cast<uint64_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  uint64_t state_ = 0;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace lipnovo
