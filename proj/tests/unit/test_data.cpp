#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cil/data.hpp"
#include "cil/errors.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"
#include "cil/runner.hpp"
#include "cil/strategies.hpp"
#include "helpers.hpp"

using namespace cil;

TEST_CASE("pair_difference arithmetic") {
  CHECK(pair_difference({1.0, 2.0}, {1.0, 2.0}) == std::vector<double>{0.0, 0.0});
  CHECK(pair_difference({1.0, 2.0}, {0.5, 1.0}) == std::vector<double>{0.5, 1.0});
  CHECK_THROWS_AS(pair_difference({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("pair_difference antisymmetry") {
  Rng rng(1);
  std::vector<double> a(8), b(8);
  for (std::size_t i = 0; i < 8; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  const auto ab = pair_difference(a, b);
  const auto ba = pair_difference(b, a);
  for (std::size_t i = 0; i < 8; ++i) CHECK(ab[i] == -ba[i]);
}

TEST_CASE("synth_sources is byte-identical per seed and conserves counts") {
  SynthSourceSpec spec;
  spec.n_sources = 3;
  spec.n_classes = 2;
  spec.dim = 6;
  spec.samples_per_class = 40;
  spec.seed = 99;
  const SynthSources a = synth_sources(spec);
  const SynthSources b = synth_sources(spec);
  REQUIRE(a.train.size() == 3);
  std::size_t total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(content_equal(a.train[k], b.train[k]));
    CHECK(a.train[k].samples == b.train[k].samples);
    total += a.train[k].size();
  }
  CHECK(content_equal(a.test, b.test));
  CHECK(total == spec.n_sources * spec.samples_per_class * spec.n_classes);
  CHECK(a.test.size() == spec.samples_per_class * spec.n_classes);
}

TEST_CASE("test-source generation does not depend on the training source count") {
  SynthSourceSpec spec;
  spec.dim = 5;
  spec.samples_per_class = 20;
  spec.seed = 7;
  spec.n_sources = 1;
  const Dataset test1 = synth_sources(spec).test;
  spec.n_sources = 4;
  const Dataset test4 = synth_sources(spec).test;
  CHECK(content_equal(test1, test4));
}

TEST_CASE("synth_sources validates its spec") {
  SynthSourceSpec spec;
  spec.dim = 1;
  CHECK_THROWS_AS(synth_sources(spec), ConfigError);
  spec.dim = 4;
  spec.n_sources = 0;
  CHECK_THROWS_AS(synth_sources(spec), ConfigError);
}

TEST_CASE("zero shift leaves naive and joint statistically indistinguishable") {
  // no drift across sources => no forgetting pressure
  double gap_sum = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    SynthSourceSpec spec;
    spec.n_sources = 4;
    spec.n_classes = 2;
    spec.dim = 8;
    spec.samples_per_class = 50;
    spec.shift_magnitude = 0.0;
    spec.seed = static_cast<std::uint64_t>(seed);
    const SynthSources data = synth_sources(spec);

    RunConfig cfg;
    cfg.strategy.kind = StrategyKind::naive;
    cfg.strategy.epochs_per_experience = 5;
    cfg.schedule = SizeSchedule{SizeMode::fixed, 50, 1.0};
    cfg.hidden_widths = {16};
    cfg.profile = MetricProfile::cls;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const double acc_naive =
        run_scenario(data.train, data.test, cfg).records.back().top1;
    cfg.strategy.kind = StrategyKind::joint;
    const double acc_joint =
        run_scenario(data.train, data.test, cfg).records.back().top1;
    gap_sum += acc_joint - acc_naive;
  }
  CHECK(std::abs(gap_sum / 10.0) <= 0.02);
}

TEST_CASE("shift 2.0 produces a >= 10% transfer gap across sources") {
  SynthSourceSpec spec;
  spec.n_sources = 4;
  spec.n_classes = 2;
  spec.dim = 16;
  spec.samples_per_class = 150;
  spec.shift_magnitude = 2.0;
  spec.seed = 2;
  const SynthSources data = synth_sources(spec);

  // train on the first half of source 0, evaluate on the held-out halves
  Dataset train_half = data.train[0];
  train_half.samples.assign(data.train[0].samples.begin(),
                            data.train[0].samples.begin() + 150);
  MlpModel model = init_model({16, 32, 16, 2}, 5);
  OptimizerState opt = make_optimizer(model);
  StrategyConfig cfg;
  cfg.epochs_per_experience = 20;
  joint_train(model, opt, train_half, cfg, 5);

  auto accuracy_on = [&](const Dataset& ds, std::size_t begin) {
    std::size_t hits = 0, n = 0;
    for (std::size_t i = begin; i < ds.samples.size(); ++i, ++n) {
      Batch b;
      b.features = Matrix(1, 16);
      std::copy(ds.samples[i].features.begin(), ds.samples[i].features.end(),
                b.features.row(0));
      b.labels = {ds.samples[i].label};
      const Matrix logits = forward(model, b);
      hits += (logits(0, 1) > logits(0, 0) ? 1 : 0) == ds.samples[i].label;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
  };
  const double own = accuracy_on(data.train[0], 150);
  const double other = accuracy_on(data.train[3], 150);
  CHECK(own - other >= 0.10);
}

TEST_CASE("binary round trip is exact") {
  Rng rng(3);
  Dataset ds = test_helpers::toy_dataset(rng, 25, 7, 3);
  test_helpers::TempDir dir("data_roundtrip");
  save_dataset(ds, dir.file("toy.clf"));
  const Dataset back = load_dataset(dir.file("toy.clf"));
  CHECK(content_equal(ds, back));
  CHECK(back.name == "toy");
}

TEST_CASE("32-bit float width is honored when declared") {
  Rng rng(4);
  Dataset ds = test_helpers::toy_dataset(rng, 5, 3, 2);
  test_helpers::TempDir dir("data_f32");
  save_dataset(ds, dir.file("toy32.clf"), 32);
  const Dataset back = load_dataset(dir.file("toy32.clf"));
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < ds.dim; ++k)
      CHECK(back.samples[i].features[k] ==
            static_cast<double>(static_cast<float>(ds.samples[i].features[k])));
}

TEST_CASE("loader rejects corrupted files without crashing") {
  Rng rng(5);
  Dataset ds = test_helpers::toy_dataset(rng, 10, 4, 2);
  test_helpers::TempDir dir("data_corrupt");
  save_dataset(ds, dir.file("ok.clf"));

  SUBCASE("truncation") {
    std::ifstream in(dir.file("ok.clf"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(dir.file("cut.clf"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    out.close();
    CHECK_THROWS_AS(load_dataset(dir.file("cut.clf")), FormatError);
  }

  SUBCASE("bad magic") {
    std::ofstream out(dir.file("bad.clf"), std::ios::binary);
    out << "NOPE" << std::string(40, '\0');
    out.close();
    CHECK_THROWS_AS(load_dataset(dir.file("bad.clf")), FormatError);
  }

  SUBCASE("label out of range names the record") {
    Dataset bad = ds;
    bad.samples[3].label = 9;  // n_classes says 2
    // save_dataset does not validate labels against C; the loader must
    save_dataset(bad, dir.file("label.clf"));
    try {
      load_dataset(dir.file("label.clf"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("record 3") != std::string::npos);
    }
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(dir.file("absent.clf")), IoError);
  }
}

TEST_CASE("csv loader parses the documented header form") {
  test_helpers::TempDir dir("data_csv");
  {
    std::ofstream out(dir.file("mini.csv"));
    out << "f0,f1,label\n0.5,-1.25,0\n2,3.5,1\n";
  }
  const Dataset ds = load_dataset_csv(dir.file("mini.csv"));
  CHECK(ds.dim == 2);
  CHECK(ds.n_classes == 2);
  REQUIRE(ds.size() == 2);
  CHECK(ds.samples[0].features == std::vector<double>{0.5, -1.25});
  CHECK(ds.samples[1].label == 1);

  {
    std::ofstream out(dir.file("badheader.csv"));
    out << "a,b,label\n1,2,0\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(dir.file("badheader.csv")), FormatError);

  {
    std::ofstream out(dir.file("badrow.csv"));
    out << "f0,f1,label\n1,notanumber,0\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(dir.file("badrow.csv")), FormatError);
}
