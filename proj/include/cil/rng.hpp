#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cil {

// splitmix64 finalizer; decent avalanche, cheap.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a key path.
// Used everywhere a sub-component needs its own reproducible stream
// (per-source shuffles, per-cell grid runs, test-set generation, ...).
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Deterministic RNG with hand-rolled distributions. std::*_distribution is
// implementation-defined in its consumption pattern; rolling our own keeps
// byte-identical runs byte-identical across standard libraries too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53 bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, one value per call.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t m = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - m) % m;  // 2^64 mod n
    std::uint64_t r = engine_();
    while (r < threshold) r = engine_();
    return static_cast<std::size_t>(r % m);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Seed-path tags so independent streams never collide by accident.
namespace seed_tag {
constexpr std::uint64_t model = 0x01;
constexpr std::uint64_t train = 0x02;
constexpr std::uint64_t source_shuffle = 0x03;
constexpr std::uint64_t chunk_sizes = 0x04;
constexpr std::uint64_t synth_global = 0x05;
constexpr std::uint64_t synth_train = 0x06;
constexpr std::uint64_t synth_test = 0x07;
constexpr std::uint64_t joint = 0x08;
constexpr std::uint64_t run = 0x09;
constexpr std::uint64_t rep = 0x0A;
}  // namespace seed_tag

}  // namespace cil
