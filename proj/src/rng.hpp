#ifndef VIPER_RNG_HPP
#define VIPER_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace viper::rng {

// splitmix64 finalizer; used to derive substream seeds.
uint64_t mix(uint64_t x);

// Deterministic PRNG stream. The distributions are implemented by hand so
// that results are identical across standard libraries; only the raw
// mt19937_64 engine comes from the standard.
class Stream {
 public:
  explicit Stream(uint64_t seed) : engine_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  // Independent stream addressed by a path of ids under a master seed.
  // Path order matters; streams with different paths are uncorrelated.
  static Stream substream(uint64_t master, std::initializer_list<uint64_t> path);

  uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 bits.
  double uniform();

  // Uniform integer in [0, n), n >= 1.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller (pairs cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace viper::rng

#endif
