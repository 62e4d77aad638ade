#pragma once

#include <cstdint>
#include <vector>

#include "cil/data.hpp"

namespace cil {

// One training chunk. Indices are global and start at 1.
struct Experience {
  int index = 0;
  std::vector<Sample> samples;
  int source_id = -1;
};

struct ExperienceStream {
  std::vector<Experience> experiences;
  Dataset test_set;
  std::vector<int> order;                       // source visit order
  std::vector<std::size_t> dropped_per_source;  // remainder samples dropped (< 2)
};

enum class SizeMode { fixed, zipf_small, zipf_large };

// Chunk sizes live on the grid {50, 100, ..., 500}. zipf_small gives rank 1
// (most probable) to size 50, zipf_large to size 500.
struct SizeSchedule {
  SizeMode mode = SizeMode::fixed;
  int fixed_size = 100;
  double zipf_exponent = 1.0;
};

constexpr int kMinChunkSize = 50;
constexpr int kMaxChunkSize = 500;
constexpr int kChunkStep = 50;
constexpr int kNumChunkSizes = 10;

// P(size) for the ten candidate sizes, index k holds size 50*(k+1).
std::vector<double> zipf_size_pmf(const SizeSchedule& schedule);

// One size draw; exposed for distribution tests.
class Rng;
int draw_zipf_size(const SizeSchedule& schedule, Rng& rng);

// i.i.d. Zipf draws until the next chunk would overrun total_samples; the
// final chunk is truncated to the remainder and dropped if < 2 samples.
std::vector<int> sample_zipf_sizes(const SizeSchedule& schedule,
                                   std::size_t total_samples, std::uint64_t seed);

// floor(total/s) chunks of s plus the truncated remainder (same drop rule).
std::vector<int> fixed_sizes(int s, std::size_t total_samples);

// Shuffles every source (seeded per source), cuts it into chunks per the
// schedule, and emits all chunks of source order[0], then order[1], ...
// Chunk contents depend only on (source, seed), not on the visit order.
ExperienceStream build_stream(const std::vector<Dataset>& sources,
                              const SizeSchedule& schedule, const Dataset& test_set,
                              std::uint64_t seed,
                              const std::vector<int>& order = {});

// All n! permutations of {0..n-1} in lexicographic order; n capped at 8.
std::vector<std::vector<int>> enumerate_orders(std::size_t n_sources);

}  // namespace cil
