#include <doctest.h>

#include <cmath>
#include <limits>

#include "cil/errors.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"
#include "helpers.hpp"

using namespace cil;

TEST_CASE("init_model is deterministic per seed") {
  const MlpModel a = init_model({2, 2}, 7);
  const MlpModel b = init_model({2, 2}, 7);
  CHECK(bits_equal(a, b));
  const MlpModel c = init_model({2, 2}, 8);
  CHECK_FALSE(bits_equal(a, c));
}

TEST_CASE("init_model parameter count for the reference architecture") {
  const MlpModel m = init_model({512, 250, 125, 64, 2}, 1);
  CHECK(m.num_layers() == 4);
  // shape arithmetic: 512*250 + 250*125 + 125*64 + 64*2 weights + 441 biases
  const std::size_t expected = 512 * 250 + 250 * 125 + 125 * 64 + 64 * 2  //
                               + 250 + 125 + 64 + 2;
  CHECK(expected == 167819);
  CHECK(m.parameter_count() == expected);
  for (std::size_t k = 0; k + 1 < m.widths.size(); ++k) {
    CHECK(m.weights[k].rows() == m.widths[k + 1]);
    CHECK(m.weights[k].cols() == m.widths[k]);
    CHECK(m.biases[k].size() == m.widths[k + 1]);
  }
}

TEST_CASE("init_model rejects degenerate architectures") {
  CHECK_THROWS_AS(init_model({3}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({4, 0, 2}, 1), ConfigError);
}

TEST_CASE("forward: zero parameters give zero logits") {
  MlpModel m = init_model({3, 4, 2}, 5);
  for (auto& w : m.weights) w.fill(0.0);
  Rng rng(11);
  const Batch batch = test_helpers::random_batch(rng, 4, 3, 2);
  const Matrix logits = forward(m, batch);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits.data()[i] == 0.0);
}

TEST_CASE("forward: identity single layer passes input through") {
  MlpModel m = init_model({2, 2}, 1);
  m.weights[0].fill(0.0);
  m.weights[0](0, 0) = 1.0;
  m.weights[0](1, 1) = 1.0;
  Batch batch;
  batch.features = Matrix(1, 2);
  batch.features(0, 0) = 3.0;
  batch.features(0, 1) = -1.0;
  batch.labels = {0};
  const Matrix logits = forward(m, batch);
  CHECK(logits(0, 0) == 3.0);
  CHECK(logits(0, 1) == -1.0);
}

TEST_CASE("forward matches a step-by-step hand evaluation") {
  const MlpModel m = init_model({3, 4, 2}, 99);
  Rng rng(123);
  Batch batch = test_helpers::random_batch(rng, 1, 3, 2);

  // hand evaluation, one neuron at a time
  std::vector<double> x(batch.features.row(0), batch.features.row(0) + 3);
  std::vector<double> h(4);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = m.biases[0][j];
    for (std::size_t k = 0; k < 3; ++k) s += m.weights[0](j, k) * x[k];
    h[j] = s > 0.0 ? s : 0.0;
  }
  std::vector<double> y(2);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = m.biases[1][j];
    for (std::size_t k = 0; k < 4; ++k) s += m.weights[1](j, k) * h[k];
    y[j] = s;
  }

  const Matrix logits = forward(m, batch);
  CHECK(logits(0, 0) == doctest::Approx(y[0]).epsilon(1e-12));
  CHECK(logits(0, 1) == doctest::Approx(y[1]).epsilon(1e-12));
}

TEST_CASE("forward rejects dimension mismatch") {
  const MlpModel m = init_model({3, 2}, 1);
  Rng rng(1);
  const Batch batch = test_helpers::random_batch(rng, 2, 4, 2);
  CHECK_THROWS_AS(forward(m, batch), ShapeError);
}

TEST_CASE("cce: uniform logits give ln 2") {
  Matrix logits(1, 2, 0.0);
  const LossGrad lg = cce_loss_and_grad(logits, {0});
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cce: saturated logits stay finite") {
  Matrix logits(1, 2);
  logits(0, 0) = 1000.0;
  logits(0, 1) = -1000.0;
  const LossGrad lg = cce_loss_and_grad(logits, {0});
  CHECK(std::isfinite(lg.loss));
  CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-12));
  for (std::size_t i = 0; i < lg.dlogits.size(); ++i)
    CHECK(std::isfinite(lg.dlogits.data()[i]));
}

TEST_CASE("cce: direct softmax evaluation oracle") {
  Matrix logits(1, 3);
  logits(0, 0) = 1.0;
  logits(0, 1) = 2.0;
  logits(0, 2) = 3.0;
  const LossGrad lg = cce_loss_and_grad(logits, {2});
  const double expected = std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  CHECK(lg.loss == doctest::Approx(expected).epsilon(1e-14));
  // gradient rows sum to zero: softmax - onehot
  double row_sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) row_sum += lg.dlogits(0, c);
  CHECK(row_sum == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cce rejects out-of-range labels") {
  Matrix logits(1, 2, 0.0);
  CHECK_THROWS_AS(cce_loss_and_grad(logits, {2}), LabelError);
  CHECK_THROWS_AS(cce_loss_and_grad(logits, {-1}), LabelError);
}

TEST_CASE("backward: zero dlogits give zero gradients") {
  const MlpModel m = init_model({3, 4, 2}, 17);
  Rng rng(3);
  const Batch batch = test_helpers::random_batch(rng, 4, 3, 2);
  const Gradients g = backward(m, batch, Matrix(4, 2, 0.0));
  for (const auto& w : g.weights)
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.data()[i] == 0.0);
  for (const auto& b : g.biases)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("backward: last-layer bias gradient equals column sums of dlogits") {
  const MlpModel m = init_model({3, 5, 4}, 23);
  Rng rng(7);
  const Batch batch = test_helpers::random_batch(rng, 6, 3, 4);
  Matrix dlogits(6, 4);
  for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits.data()[i] = rng.normal();

  const Gradients g = backward(m, batch, dlogits);
  for (std::size_t j = 0; j < 4; ++j) {
    double column_sum = 0.0;
    for (std::size_t i = 0; i < 6; ++i) column_sum += dlogits(i, j);
    CHECK(g.biases.back()[j] == column_sum);
  }
}

TEST_CASE("backward agrees with central finite differences") {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    const MlpModel m = init_model({8, 5, 3}, rng.next_u64());
    const Batch batch = test_helpers::random_batch(rng, n, 8, 3);
    CHECK(finite_diff_check(m, batch, 1e-5) < 1e-5);
  }
}

TEST_CASE("finite_diff_check: affine logits are near machine precision") {
  const MlpModel m = init_model({4, 3}, 5);  // no hidden layer
  Rng rng(9);
  const Batch batch = test_helpers::random_batch(rng, 4, 4, 3);
  CHECK(finite_diff_check(m, batch, 1e-5) < 1e-9);
}

TEST_CASE("finite_diff_check rejects non-positive eps") {
  const MlpModel m = init_model({2, 2}, 1);
  Rng rng(1);
  const Batch batch = test_helpers::random_batch(rng, 2, 2, 2);
  CHECK_THROWS_AS(finite_diff_check(m, batch, 0.0), ConfigError);
}

TEST_CASE("sgd: first step moves by exactly lr") {
  MlpModel m = init_model({1, 1}, 1);
  const double theta0 = m.weights[0](0, 0);
  OptimizerState opt = make_optimizer(m, 0.01, 0.9);
  Gradients g = ParamVector::zeros_like(m);
  g.weights[0](0, 0) = 1.0;
  sgd_step(m, g, opt);
  CHECK(m.weights[0](0, 0) == theta0 - 0.01);
}

TEST_CASE("sgd: zero momentum reduces to plain gradient descent bitwise") {
  MlpModel a = init_model({3, 4, 2}, 77);
  MlpModel b = a;
  OptimizerState opt = make_optimizer(a, 0.05, 0.0);
  Rng rng(5);
  for (int step = 0; step < 3; ++step) {
    const Batch batch = test_helpers::random_batch(rng, 4, 3, 2);
    const LossGrad lg = cce_loss_and_grad(forward(a, batch), batch.labels);
    const Gradients g = backward(a, batch, lg.dlogits);
    sgd_step(a, g, opt);
    // reference: plain theta -= lr*g on the same gradients
    for (std::size_t k = 0; k < b.weights.size(); ++k) {
      for (std::size_t i = 0; i < b.weights[k].size(); ++i)
        b.weights[k].data()[i] -= 0.05 * g.weights[k].data()[i];
      for (std::size_t i = 0; i < b.biases[k].size(); ++i)
        b.biases[k][i] -= 0.05 * g.biases[k][i];
    }
    CHECK(bits_equal(a, b));
  }
}

TEST_CASE("sgd: two steps of constant gradient unroll the velocity recurrence") {
  MlpModel m = init_model({1, 1}, 3);
  const double theta0 = m.weights[0](0, 0);
  OptimizerState opt = make_optimizer(m, 0.01, 0.9);
  Gradients g = ParamVector::zeros_like(m);
  g.weights[0](0, 0) = 1.0;
  sgd_step(m, g, opt);
  sgd_step(m, g, opt);
  // v1 = -0.01, v2 = 0.9*v1 - 0.01 = -0.019, total -0.029
  CHECK(m.weights[0](0, 0) == doctest::Approx(theta0 - 0.029).epsilon(1e-14));
}

TEST_CASE("sgd reports the location of non-finite gradients") {
  MlpModel m = init_model({2, 2}, 1);
  OptimizerState opt = make_optimizer(m);
  Gradients g = ParamVector::zeros_like(m);
  g.weights[0](1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(sgd_step(m, g, opt),
                       "sgd_step: non-finite gradient at layer 0 weight[1,0]",
                       NumericError);
}

TEST_CASE("one small sgd step strictly decreases the batch loss") {
  Rng rng(31);
  for (int seed = 0; seed < 100; ++seed) {
    MlpModel m = init_model({6, 8, 3}, static_cast<std::uint64_t>(seed));
    const Batch batch = test_helpers::random_batch(rng, 8, 6, 3);
    const LossGrad before = cce_loss_and_grad(forward(m, batch), batch.labels);
    OptimizerState opt = make_optimizer(m, 1e-3, 0.9);
    sgd_step(m, backward(m, batch, before.dlogits), opt);
    const double after = cce_loss_and_grad(forward(m, batch), batch.labels).loss;
    CHECK(after < before.loss);
  }
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  auto run = [] {
    MlpModel m = init_model({4, 6, 2}, 42);
    OptimizerState opt = make_optimizer(m);
    Rng rng(1234);
    for (int step = 0; step < 10; ++step) {
      const Batch batch = test_helpers::random_batch(rng, 5, 4, 2);
      const LossGrad lg = cce_loss_and_grad(forward(m, batch), batch.labels);
      sgd_step(m, backward(m, batch, lg.dlogits), opt);
    }
    return m;
  };
  CHECK(bits_equal(run(), run()));
}

TEST_CASE("softmax-cce survives logit magnitudes up to 1e4") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix logits(3, 4);
    for (std::size_t i = 0; i < logits.size(); ++i)
      logits.data()[i] = (rng.uniform() * 2.0 - 1.0) * 1e4;
    const LossGrad lg = cce_loss_and_grad(logits, {0, 1, 2});
    CHECK(std::isfinite(lg.loss));
    for (std::size_t i = 0; i < lg.dlogits.size(); ++i)
      CHECK(std::isfinite(lg.dlogits.data()[i]));
  }
}
