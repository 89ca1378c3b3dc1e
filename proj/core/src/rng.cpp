#include "ozlab/rng.hpp"

#include <cmath>

namespace oz {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, const std::string& stream, uint64_t index) {
  // FNV-1a over the label, then two splitmix64 steps mixing in the index.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  uint64_t s = master ^ h;
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (index + 1);
  uint64_t out = splitmix64(s);
  return out;
}

Rng::Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

uint64_t Rng::below(uint64_t n) {
  // multiply-shift; bias is negligible for n << 2^64 and the mapping is fixed
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(engine_()) * n) >> 64);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

}  // namespace oz
