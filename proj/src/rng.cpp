#include "sarcasm/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sarcasm {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // rejection sampling kills modulo bias
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::gaussian() {
  // u1 in (0, 1] keeps the log finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  Rng mix(master ^ fnv1a64(tag));
  return mix.next_u64();
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) {
  cdf_.reserve(weights.size());
  double acc = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("DiscreteSampler: weights must be finite and non-negative");
    acc += w;
    cdf_.push_back(acc);
  }
  if (cdf_.empty() || acc <= 0.0)
    throw std::invalid_argument("DiscreteSampler: total weight must be positive");
}

int DiscreteSampler::sample(Rng& rng) const {
  double u = rng.uniform() * cdf_.back();
  // first index with cdf > u; zero-weight entries share a cdf value with
  // their predecessor and are skipped
  std::size_t lo = 0, hi = cdf_.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (cdf_[mid] > u)
      hi = mid;
    else
      lo = mid + 1;
  }
  return static_cast<int>(lo);
}

}  // namespace sarcasm
