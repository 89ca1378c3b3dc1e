#pragma once
#include <cstdint>
#include <random>
#include <string>

namespace oz {

// All randomness flows through Rng so runs are reproducible bit for bit.
// Seeds are derived from one 64-bit master seed via a splitmix64 chain;
// value extraction uses fixed bit arithmetic, not std distributions, so the
// stream does not depend on the standard library implementation.

inline constexpr const char* kRngName = "mt19937_64+sm64";

uint64_t splitmix64(uint64_t& state);

// Derives a child seed for a named stream (stage label + index).
uint64_t derive_seed(uint64_t master, const std::string& stream, uint64_t index = 0);

class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                 // [0,1), 53-bit
  bool bernoulli(double p);         // true with probability p
  uint64_t below(uint64_t n);       // uniform in [0,n)
  double normal();                  // standard normal (polar method)

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace oz
