#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "cil/errors.hpp"
#include "cil/rng.hpp"
#include "cil/stream.hpp"
#include "helpers.hpp"

using namespace cil;

TEST_CASE("zipf pmf: small and large are exact mirrors") {
  SizeSchedule small{SizeMode::zipf_small, 0, 1.3};
  SizeSchedule large{SizeMode::zipf_large, 0, 1.3};
  const auto ps = zipf_size_pmf(small);
  const auto pl = zipf_size_pmf(large);
  for (int k = 0; k < kNumChunkSizes; ++k)
    CHECK(ps[static_cast<std::size_t>(k)] ==
          pl[static_cast<std::size_t>(kNumChunkSizes - 1 - k)]);
}

TEST_CASE("zipf exponent 0 is uniform (chi-squared, p > 0.01)") {
  SizeSchedule schedule{SizeMode::zipf_small, 0, 0.0};
  Rng rng(42);
  std::map<int, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[draw_zipf_size(schedule, rng)]++;
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (int s = 50; s <= 500; s += 50) {
    const double d = counts[s] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 21.666);  // critical value, 9 dof, p = 0.01
}

TEST_CASE("zipf_small rank-1 mass matches 1/H10") {
  SizeSchedule schedule{SizeMode::zipf_small, 0, 1.0};
  Rng rng(7);
  const int draws = 1000000;
  int hits = 0;
  for (int i = 0; i < draws; ++i)
    if (draw_zipf_size(schedule, rng) == 50) ++hits;
  double h10 = 0.0;
  for (int k = 1; k <= 10; ++k) h10 += 1.0 / k;
  const double p_hat = static_cast<double>(hits) / draws;
  CHECK(std::abs(p_hat - 1.0 / h10) < 0.003);
  CHECK(1.0 / h10 == doctest::Approx(0.3414).epsilon(1e-3));
}

TEST_CASE("steep zipf_large is almost surely size 500") {
  SizeSchedule schedule{SizeMode::zipf_large, 0, 10.0};
  Rng rng(3);
  const int draws = 100000;
  int hits = 0;
  for (int i = 0; i < draws; ++i)
    if (draw_zipf_size(schedule, rng) == 500) ++hits;
  CHECK(static_cast<double>(hits) / draws >= 0.998);
}

TEST_CASE("sample_zipf_sizes truncates and never overruns the total") {
  SizeSchedule schedule{SizeMode::zipf_small, 0, 1.0};
  Rng seed_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t total = 50 + seed_rng.uniform_index(5000);
    const auto sizes = sample_zipf_sizes(schedule, total, seed_rng.next_u64());
    std::size_t sum = 0;
    for (int s : sizes) {
      CHECK(s >= 2);
      CHECK(s <= 500);
      sum += static_cast<std::size_t>(s);
    }
    CHECK(sum <= total);
    CHECK(total - sum <= 1);  // only a sub-2-sample remainder may be dropped
  }
  CHECK_THROWS_AS(sample_zipf_sizes(schedule, 49, 1), StreamError);
}

TEST_CASE("fixed_sizes arithmetic and drop rule") {
  CHECK(fixed_sizes(50, 500) == std::vector<int>(10, 50));
  CHECK(fixed_sizes(500, 1250) == std::vector<int>{500, 500, 250});
  CHECK(fixed_sizes(500, 501) == std::vector<int>{500});  // remainder 1 dropped
  CHECK(fixed_sizes(500, 502) == std::vector<int>{500, 2});
  CHECK_THROWS_AS(fixed_sizes(49, 1000), ConfigError);
  CHECK_THROWS_AS(fixed_sizes(550, 1000), ConfigError);
  CHECK_THROWS_AS(fixed_sizes(60, 1000), ConfigError);
}

namespace {

std::vector<Dataset> make_sources(Rng& rng, std::size_t n_sources, std::size_t size,
                                  std::size_t dim = 3) {
  std::vector<Dataset> sources;
  for (std::size_t j = 0; j < n_sources; ++j) {
    Dataset ds = test_helpers::toy_dataset(rng, size, dim, 2);
    ds.name = "src" + std::to_string(j);
    sources.push_back(std::move(ds));
  }
  return sources;
}

}  // namespace

TEST_CASE("build_stream: one source cut as a single chunk") {
  Rng rng(1);
  const auto sources = make_sources(rng, 1, 100);
  const Dataset test = test_helpers::toy_dataset(rng, 20, 3, 2);
  const auto stream =
      build_stream(sources, SizeSchedule{SizeMode::fixed, 100, 1.0}, test, 5);
  CHECK(stream.experiences.size() == 1);
  CHECK(stream.experiences[0].index == 1);
  CHECK(stream.experiences[0].samples.size() == 100);
}

TEST_CASE("build_stream: sources stay contiguous in permutation order") {
  Rng rng(2);
  const auto sources = make_sources(rng, 4, 120);
  const Dataset test = test_helpers::toy_dataset(rng, 20, 3, 2);
  const std::vector<int> order{2, 0, 3, 1};
  const auto stream =
      build_stream(sources, SizeSchedule{SizeMode::fixed, 50, 1.0}, test, 5, order);

  std::vector<int> run_order;
  for (const Experience& exp : stream.experiences)
    if (run_order.empty() || run_order.back() != exp.source_id)
      run_order.push_back(exp.source_id);
  CHECK(run_order == order);  // exactly 4 contiguous runs
  for (std::size_t i = 0; i < stream.experiences.size(); ++i)
    CHECK(stream.experiences[i].index == static_cast<int>(i + 1));
}

TEST_CASE("build_stream is deterministic per seed") {
  Rng rng(3);
  const auto sources = make_sources(rng, 3, 200);
  const Dataset test = test_helpers::toy_dataset(rng, 30, 3, 2);
  const SizeSchedule schedule{SizeMode::zipf_small, 0, 1.0};
  const auto a = build_stream(sources, schedule, test, 77);
  const auto b = build_stream(sources, schedule, test, 77);
  REQUIRE(a.experiences.size() == b.experiences.size());
  for (std::size_t i = 0; i < a.experiences.size(); ++i) {
    CHECK(a.experiences[i].samples == b.experiences[i].samples);
    CHECK(a.experiences[i].source_id == b.experiences[i].source_id);
  }
}

TEST_CASE("build_stream conserves every sample") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_sources = 1 + rng.uniform_index(4);
    const std::size_t size = 60 + rng.uniform_index(600);
    const auto sources = make_sources(rng, n_sources, size);
    const Dataset test = test_helpers::toy_dataset(rng, 10, 3, 2);
    const SizeSchedule schedule = trial % 2 == 0
                                      ? SizeSchedule{SizeMode::zipf_small, 0, 1.0}
                                      : SizeSchedule{SizeMode::fixed, 150, 1.0};
    const auto stream = build_stream(sources, schedule, test, rng.next_u64());

    std::map<int, std::size_t> emitted;
    std::set<double> seen;  // toy features are continuous draws: unique a.s.
    for (const Experience& exp : stream.experiences) {
      emitted[exp.source_id] += exp.samples.size();
      CHECK(exp.samples.size() >= 2);
      if (schedule.mode == SizeMode::fixed)
        CHECK(exp.samples.size() <= static_cast<std::size_t>(schedule.fixed_size));
      else
        CHECK(exp.samples.size() <= 500);
      for (const Sample& s : exp.samples) seen.insert(s.features[0]);
    }
    std::size_t expected_seen = 0;
    for (std::size_t j = 0; j < n_sources; ++j) {
      CHECK(emitted[static_cast<int>(j)] + stream.dropped_per_source[j] ==
            sources[j].size());
      expected_seen += emitted[static_cast<int>(j)];
    }
    CHECK(seen.size() == expected_seen);  // no duplication
  }
}

TEST_CASE("build_stream rejects test/train overlap") {
  Rng rng(5);
  auto sources = make_sources(rng, 2, 80);
  Dataset test = test_helpers::toy_dataset(rng, 10, 3, 2);
  test.samples[4] = sources[1].samples[17];
  CHECK_THROWS_AS(
      build_stream(sources, SizeSchedule{SizeMode::fixed, 50, 1.0}, test, 1),
      IntegrityError);
}

TEST_CASE("build_stream rejects bad orders") {
  Rng rng(6);
  const auto sources = make_sources(rng, 3, 60);
  const Dataset test = test_helpers::toy_dataset(rng, 10, 3, 2);
  CHECK_THROWS_AS(build_stream(sources, SizeSchedule{SizeMode::fixed, 50, 1.0}, test, 1,
                               {0, 1}),
                  ConfigError);
  CHECK_THROWS_AS(build_stream(sources, SizeSchedule{SizeMode::fixed, 50, 1.0}, test, 1,
                               {0, 1, 1}),
                  ConfigError);
}

TEST_CASE("enumerate_orders") {
  CHECK(enumerate_orders(1) == std::vector<std::vector<int>>{{0}});
  const auto three = enumerate_orders(3);
  REQUIRE(three.size() == 6);
  CHECK(three.front() == std::vector<int>{0, 1, 2});
  CHECK(three.back() == std::vector<int>{2, 1, 0});
  CHECK(enumerate_orders(4).size() == 24);
  CHECK_THROWS_AS(enumerate_orders(9), ConfigError);
  CHECK_THROWS_AS(enumerate_orders(0), ConfigError);
}
