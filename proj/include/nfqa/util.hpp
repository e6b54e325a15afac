#pragma once
// Small shared utilities: stable hashing, reproducible RNG, string helpers,
// and a bounded parallel-for. Everything here is deterministic across
// platforms; none of it depends on implementation-defined stdlib behavior.

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace nfqa {

// FNV-1a 64-bit. Used for prompt digests and cache keys; stable by
// construction, so cache entries survive rebuilds and platform moves.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// splitmix64 step; good avalanche, used for seed derivation and as the
// engine behind Rng.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent child stream seed from a base seed and a label
// (e.g. a question id), so per-question randomness is stable no matter in
// which order questions are processed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return mix64(base ^ fnv1a64(label));
}

// Deterministic PRNG with explicit algorithms for every draw. We do not use
// std <random> distributions because their output is implementation-defined;
// reference lists sampled with a fixed seed must be byte-identical on every
// toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound) via rejection sampling; bound > 0.
  std::uint64_t uniform(std::uint64_t bound);

  // Uniform in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1).
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in selection order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t state_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
std::string replace_all(std::string s, std::string_view from,
                        std::string_view to);

// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Results must be
// written to pre-sized slots so scheduling cannot affect output order.
void parallel_for(std::size_t n, int parallelism,
                  const std::function<void(std::size_t)>& fn);

// Fixed-format float for CSV/report output (deterministic across locales).
std::string format_fixed(double value, int decimals = 4);

}  // namespace nfqa
