#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flattab {

uint64_t splitmix64(uint64_t& state);
uint64_t fnv1a64(std::string_view s);

// xoshiro256** generator. Hand-rolled so that draws are identical across
// platforms and the state round-trips through checkpoints exactly.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // [0, 1) with 53 bits of randomness.
  double next_double();
  double uniform(double lo, double hi);
  double normal();  // standard normal via Box-Muller
  // Unbiased integer in [0, bound); bound must be > 0.
  uint64_t below(uint64_t bound);
  bool bernoulli(double p);
  // Sum of n Bernoulli(p) draws; consumes exactly n uniforms.
  int binomial(int n, double p);

  // Derived stream; independent of the parent's future draws.
  Rng child(std::string_view name) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::array<uint64_t, 4> state() const { return s_; }
  static Rng from_state(const std::array<uint64_t, 4>& s);

  bool operator==(const Rng& o) const { return s_ == o.s_; }

 private:
  std::array<uint64_t, 4> s_{};
};

uint64_t derive_seed(uint64_t seed, std::string_view name);

}  // namespace flattab
