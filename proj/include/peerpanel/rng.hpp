#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace peerpanel {

// Named stages used as the second component of stream keys. Adding a stage
// never perturbs the draws of an existing one.
enum class Stage : std::uint64_t {
  pattern = 1,
  alpha = 2,
  network = 3,
  outcome = 4,
  bootstrap = 5,
};

// Seedable generator with a portable stream-splitting rule.
//
// A stream is identified by a key (seed, k1, k2, ...). The key is folded
// through SplitMix64 into a single 64-bit word that seeds std::mt19937_64,
// whose output sequence is fixed by the C++ standard. The distributions
// below are implemented here rather than taken from <random> because the
// standard library distributions are not specified bit-for-bit across
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> key);
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n); unbiased (rejection on the top range).
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Marsaglia polar method.
  double normal();

  // +1 or -1 with equal probability.
  double rademacher() { return (next() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace peerpanel
