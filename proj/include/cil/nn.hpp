#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "cil/matrix.hpp"

namespace cil {

// A mini-batch: n feature rows plus integer class labels.
struct Batch {
  Matrix features;          // n x d
  std::vector<int> labels;  // n entries in [0, C)
};

// Plain feed-forward rectifier network. weights[k] maps layer k to layer
// k+1 and has shape widths[k+1] x widths[k]; the output layer is affine
// (softmax lives in the loss).
struct MlpModel {
  std::vector<std::size_t> widths;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t num_classes() const { return widths.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;
};

// Per-parameter container mirroring a model's weight/bias shapes. Doubles
// as gradient storage, optimizer velocity, Fisher diagonal, SI importance.
struct ParamVector {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static ParamVector zeros_like(const MlpModel& model);
};

using Gradients = ParamVector;

// Elementwise visit over parameter containers sharing one layout.
// fn receives head's value by reference, then one const value per tail.
template <class Fn, class Head, class... Tail>
void param_zip(Fn&& fn, Head& head, const Tail&... tail) {
  for (std::size_t k = 0; k < head.weights.size(); ++k) {
    double* h = head.weights[k].data();
    const std::size_t n = head.weights[k].size();
    auto ptrs = std::make_tuple(tail.weights[k].data()...);
    for (std::size_t i = 0; i < n; ++i)
      std::apply([&](auto*... p) { fn(h[i], p[i]...); }, ptrs);
  }
  for (std::size_t k = 0; k < head.biases.size(); ++k) {
    double* h = head.biases[k].data();
    const std::size_t n = head.biases[k].size();
    auto ptrs = std::make_tuple(tail.biases[k].data()...);
    for (std::size_t i = 0; i < n; ++i)
      std::apply([&](auto*... p) { fn(h[i], p[i]...); }, ptrs);
  }
}

// Copy of a model's parameters as a ParamVector.
ParamVector snapshot_params(const MlpModel& model);

struct OptimizerState {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  ParamVector velocity;  // same shapes as the model, zero-initialized
};

OptimizerState make_optimizer(const MlpModel& model, double learning_rate = 1e-2,
                              double momentum = 0.9);

// He-style init: W ~ N(0, 2/fan_in), biases zero. Deterministic per seed.
MlpModel init_model(const std::vector<std::size_t>& widths, std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> activations;  // activations[k] = input to layer k
  std::vector<Matrix> preacts;      // preacts[k] = affine output of layer k
  const Matrix& logits() const { return preacts.back(); }
};

ForwardCache forward_cached(const MlpModel& model, const Matrix& features);
Matrix forward(const MlpModel& model, const Batch& batch);

struct LossGrad {
  double loss = 0.0;
  Matrix dlogits;
};

// Mean categorical cross entropy with softmax folded in.
// loss = -(1/n) sum_i log softmax(logits_i)[label_i]
// dlogits = (softmax - onehot) / n
LossGrad cce_loss_and_grad(const Matrix& logits, const std::vector<int>& labels);

// Analytic gradients of a scalar loss given dLoss/dlogits.
Gradients backward(const MlpModel& model, const Batch& batch, const Matrix& dlogits);
Gradients backward_from_cache(const MlpModel& model, const ForwardCache& cache,
                              const Matrix& dlogits);

// v <- momentum*v - lr*g;  theta <- theta + v
void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& opt);

// Max over parameters of |analytic - central difference| / max(|a|,|f|,1e-12)
// for the CCE loss on this batch.
double finite_diff_check(const MlpModel& model, const Batch& batch, double eps);

// Row-wise stable softmax.
Matrix softmax_rows(const Matrix& logits);

// Exact bit-for-bit parameter comparison (stricter than == on doubles).
bool bits_equal(const MlpModel& a, const MlpModel& b);

}  // namespace cil
