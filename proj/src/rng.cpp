#include "redda/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace redda {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(uint64_t master, uint64_t index, uint64_t purpose) {
  uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (0x9e3779b97f4a7c15ULL + index));
  s = splitmix64(s ^ (0xc2b2ae3d27d4eb4fULL + purpose));
  return Rng(s);
}

double Rng::uniform() {
  // 53 random bits mapped to (0, 1].
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u * (hi - lo);
}

uint64_t Rng::uniform_index(uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

double Rng::chisq(int dof) {
  if (dof < 1) throw std::invalid_argument("chisq: dof must be positive");
  double acc = 0.0;
  for (int i = 0; i < dof; ++i) {
    const double z = normal();
    acc += z * z;
  }
  return acc;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace redda
