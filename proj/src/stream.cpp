#include "cil/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <unordered_set>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

std::vector<double> zipf_size_pmf(const SizeSchedule& schedule) {
  if (schedule.mode == SizeMode::fixed)
    throw ConfigError("zipf_size_pmf: schedule is fixed-size");
  std::vector<double> pmf(kNumChunkSizes);
  double norm = 0.0;
  for (int k = 0; k < kNumChunkSizes; ++k) {
    pmf[k] = 1.0 / std::pow(static_cast<double>(k + 1), schedule.zipf_exponent);
    norm += pmf[k];
  }
  for (double& p : pmf) p /= norm;
  if (schedule.mode == SizeMode::zipf_large) std::reverse(pmf.begin(), pmf.end());
  return pmf;  // index k <-> size 50*(k+1)
}

int draw_zipf_size(const SizeSchedule& schedule, Rng& rng) {
  const std::vector<double> pmf = zipf_size_pmf(schedule);
  const double u = rng.uniform();
  double cum = 0.0;
  for (int k = 0; k < kNumChunkSizes; ++k) {
    cum += pmf[k];
    if (u < cum) return kChunkStep * (k + 1);
  }
  return kMaxChunkSize;
}

namespace {

// Shared truncation rule: the last chunk is whatever remains and is
// dropped when it cannot hold 2 samples.
void finish_with_remainder(std::vector<int>& sizes, std::size_t remainder) {
  if (remainder >= 2) sizes.push_back(static_cast<int>(remainder));
}

}  // namespace

std::vector<int> sample_zipf_sizes(const SizeSchedule& schedule,
                                   std::size_t total_samples, std::uint64_t seed) {
  if (schedule.mode == SizeMode::fixed)
    throw ConfigError("sample_zipf_sizes: schedule is fixed-size");
  if (total_samples < static_cast<std::size_t>(kMinChunkSize))
    throw StreamError("sample_zipf_sizes: total " + std::to_string(total_samples) +
                      " is below the smallest chunk size");

  Rng rng(seed);
  std::vector<int> sizes;
  std::size_t used = 0;
  while (used < total_samples) {
    const int s = draw_zipf_size(schedule, rng);
    if (used + static_cast<std::size_t>(s) > total_samples) {
      finish_with_remainder(sizes, total_samples - used);
      break;
    }
    sizes.push_back(s);
    used += static_cast<std::size_t>(s);
  }
  return sizes;
}

std::vector<int> fixed_sizes(int s, std::size_t total_samples) {
  if (s < kMinChunkSize || s > kMaxChunkSize || s % kChunkStep != 0)
    throw ConfigError("fixed_sizes: size " + std::to_string(s) +
                      " not in {50,100,...,500}");
  std::vector<int> sizes;
  const std::size_t full = total_samples / static_cast<std::size_t>(s);
  sizes.assign(full, s);
  finish_with_remainder(sizes, total_samples - full * static_cast<std::size_t>(s));
  return sizes;
}

namespace {

std::string sample_key(const Sample& s) {
  std::string key;
  key.resize(s.features.size() * sizeof(double) + sizeof(int));
  std::memcpy(key.data(), s.features.data(), s.features.size() * sizeof(double));
  std::memcpy(key.data() + s.features.size() * sizeof(double), &s.label, sizeof(int));
  return key;
}

}  // namespace

ExperienceStream build_stream(const std::vector<Dataset>& sources,
                              const SizeSchedule& schedule, const Dataset& test_set,
                              std::uint64_t seed, const std::vector<int>& order) {
  if (sources.empty()) throw StreamError("build_stream: no sources");

  std::vector<int> visit = order;
  if (visit.empty()) {
    visit.resize(sources.size());
    std::iota(visit.begin(), visit.end(), 0);
  }
  {
    std::vector<int> check = visit;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i)
      if (check.size() != sources.size() || check[i] != static_cast<int>(i))
        throw ConfigError("build_stream: order is not a permutation of the sources");
  }

  std::unordered_set<std::string> test_keys;
  test_keys.reserve(test_set.samples.size());
  for (const Sample& s : test_set.samples) test_keys.insert(sample_key(s));

  // Chunk every source independently of the visit order, so permuting the
  // order permutes whole blocks of identical chunks.
  std::vector<std::vector<Experience>> per_source(sources.size());
  ExperienceStream stream;
  stream.test_set = test_set;
  stream.order = visit;
  stream.dropped_per_source.assign(sources.size(), 0);

  for (std::size_t j = 0; j < sources.size(); ++j) {
    const Dataset& src = sources[j];
    if (src.samples.empty()) throw StreamError("build_stream: empty source " + src.name);
    for (const Sample& s : src.samples)
      if (test_keys.count(sample_key(s)))
        throw IntegrityError("build_stream: source '" + src.name +
                             "' overlaps the test set");

    std::vector<Sample> shuffled = src.samples;
    Rng rng(derive_seed(seed, {seed_tag::source_shuffle, j}));
    rng.shuffle(shuffled);

    std::vector<int> sizes;
    if (schedule.mode == SizeMode::fixed) {
      sizes = fixed_sizes(schedule.fixed_size, shuffled.size());
    } else {
      sizes = sample_zipf_sizes(schedule, shuffled.size(),
                                derive_seed(seed, {seed_tag::chunk_sizes, j}));
    }

    std::size_t consumed = 0;
    for (int sz : sizes) {
      Experience exp;
      exp.source_id = static_cast<int>(j);
      exp.samples.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(consumed),
                         shuffled.begin() + static_cast<std::ptrdiff_t>(consumed + sz));
      consumed += static_cast<std::size_t>(sz);
      per_source[j].push_back(std::move(exp));
    }
    stream.dropped_per_source[j] = shuffled.size() - consumed;
  }

  int index = 1;
  for (int j : visit)
    for (Experience& exp : per_source[static_cast<std::size_t>(j)]) {
      exp.index = index++;
      stream.experiences.push_back(std::move(exp));
    }
  return stream;
}

std::vector<std::vector<int>> enumerate_orders(std::size_t n_sources) {
  if (n_sources < 1 || n_sources > 8)
    throw ConfigError("enumerate_orders: source count must lie in [1, 8]");
  std::vector<int> perm(n_sources);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> orders;
  do {
    orders.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return orders;
}

}  // namespace cil
