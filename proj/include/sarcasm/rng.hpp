#ifndef SARCASM_RNG_HPP
#define SARCASM_RNG_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sarcasm {

// splitmix64 engine. Every stochastic routine in the project draws from this
// class instead of <random> distributions, which are not portable across
// standard libraries; identical seeds give identical streams everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased draw from [0, n); n must be positive
  std::uint64_t below(std::uint64_t n);

  // standard normal via Box-Muller; no cached spare, so the stream position
  // after a call does not depend on call history
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Seed for a named sub-stream. Components derive their generators as
// derive_seed(master, "tag") so adding a consumer never shifts another
// consumer's stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

// Samples indices in proportion to non-negative weights (binary search over
// the cumulative sum). Zero-weight indices are never returned.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights);
  int sample(Rng& rng) const;
  std::size_t size() const { return cdf_.size(); }
  double total_weight() const { return cdf_.empty() ? 0.0 : cdf_.back(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace sarcasm

#endif
