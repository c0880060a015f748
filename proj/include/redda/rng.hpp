#pragma once

// Seedable randomness with an explicit splitting scheme. Streams are derived
// as stream(master, index, purpose) via splitmix64 mixing, so restarts and
// benchmark replicates can run concurrently yet reproduce bit-identically.
// All variate transforms are hand-rolled on top of mt19937_64 raw output;
// std::*_distribution is avoided because its output is not pinned by the
// standard.

#include <cstdint>
#include <random>
#include <vector>

namespace redda {

uint64_t splitmix64(uint64_t x);

class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  // Independent substream. `purpose` separates uses that share an index.
  static Rng stream(uint64_t master, uint64_t index, uint64_t purpose = 0);

  uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1]: never returns 0, safe under log().
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n), n >= 1, via rejection (no modulo bias).
  uint64_t uniform_index(uint64_t n);

  // Standard normal via Box-Muller (pairs cached).
  double normal();
  // Chi-square with integer degrees of freedom (sum of squared normals).
  double chisq(int dof);

  // k distinct indices drawn from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace redda
