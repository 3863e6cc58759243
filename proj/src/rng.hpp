#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dynrec {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a (stream, index) pair; independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ (index * 0xd1b54a32d192ed03ULL));
}

/// mt19937_64 with range reductions that do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    const unsigned __int128 m = (unsigned __int128)engine_() * (unsigned __int128)n;
    return std::size_t(m >> 64);
  }

  /// Uniform real in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

  /// First k entries of a seeded Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) std::swap(idx[i], idx[i + index(n - i)]);
    idx.resize(k < n ? k : n);
    return idx;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dynrec
