#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmpoint {

// Deterministic xoshiro256++ stream. Self-contained so sequences are stable
// across standard libraries and platforms.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller (caches the spare draw).
  double normal();
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives independent named random streams from one 64-bit root seed.
// Identical root and path always yield the identical sequence; distinct
// names or indices yield statistically independent streams.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  std::uint64_t child_seed(std::string_view name) const;
  std::uint64_t child_seed(std::string_view name, std::uint64_t a) const;
  std::uint64_t child_seed(std::string_view name, std::uint64_t a, std::uint64_t b) const;

  Stream stream(std::string_view name) const { return Stream(child_seed(name)); }
  Stream stream(std::string_view name, std::uint64_t a) const { return Stream(child_seed(name, a)); }
  Stream stream(std::string_view name, std::uint64_t a, std::uint64_t b) const {
    return Stream(child_seed(name, a, b));
  }

 private:
  std::uint64_t root_;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace mmpoint
