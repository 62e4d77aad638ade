#include "cil/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

ParamVector ParamVector::zeros_like(const MlpModel& model) {
  ParamVector pv;
  pv.weights.reserve(model.weights.size());
  pv.biases.reserve(model.biases.size());
  for (const auto& w : model.weights) pv.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : model.biases) pv.biases.emplace_back(b.size(), 0.0);
  return pv;
}

ParamVector snapshot_params(const MlpModel& model) {
  return ParamVector{model.weights, model.biases};
}

OptimizerState make_optimizer(const MlpModel& model, double learning_rate,
                              double momentum) {
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must lie in [0, 1)");
  return OptimizerState{learning_rate, momentum, ParamVector::zeros_like(model)};
}

MlpModel init_model(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() < 2)
    throw ConfigError("init_model: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("init_model: zero layer width");

  MlpModel model;
  model.widths = widths;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t fan_in = widths[k];
    const std::size_t fan_out = widths[k + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

ForwardCache forward_cached(const MlpModel& model, const Matrix& features) {
  if (features.cols() != model.input_dim())
    throw ShapeError("forward: feature dim " + std::to_string(features.cols()) +
                     " does not match model input " +
                     std::to_string(model.input_dim()));

  ForwardCache cache;
  const std::size_t n = features.rows();
  cache.activations.push_back(features);
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    const Matrix& a = cache.activations.back();
    const Matrix& w = model.weights[k];
    const auto& b = model.biases[k];
    Matrix z(n, w.rows());
    for (std::size_t i = 0; i < n; ++i) {
      const double* ai = a.row(i);
      double* zi = z.row(i);
      for (std::size_t j = 0; j < w.rows(); ++j) {
        const double* wj = w.row(j);
        double s = b[j];
        for (std::size_t c = 0; c < w.cols(); ++c) s += ai[c] * wj[c];
        zi[j] = s;
      }
    }
    cache.preacts.push_back(z);
    if (k + 1 < model.num_layers()) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
      cache.activations.push_back(std::move(z));
    }
  }
  return cache;
}

Matrix forward(const MlpModel& model, const Batch& batch) {
  return forward_cached(model, batch.features).logits();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* li = logits.row(i);
    double* pi = p.row(i);
    double m = li[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) m = std::max(m, li[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      pi[c] = std::exp(li[c] - m);
      sum += pi[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) pi[c] /= sum;
  }
  return p;
}

LossGrad cce_loss_and_grad(const Matrix& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n)
    throw ShapeError("cce: label count does not match batch size");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw LabelError("cce: label " + std::to_string(labels[i]) +
                       " out of range at row " + std::to_string(i));

  LossGrad out;
  out.dlogits = Matrix(n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = logits.row(i);
    double* di = out.dlogits.row(i);
    double m = li[0];
    for (std::size_t k = 1; k < c; ++k) m = std::max(m, li[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      di[k] = std::exp(li[k] - m);
      sum += di[k];
    }
    loss += std::log(sum) + m - li[labels[i]];
    const double inv = 1.0 / (sum * static_cast<double>(n));
    for (std::size_t k = 0; k < c; ++k) di[k] *= inv;
    di[labels[i]] -= 1.0 / static_cast<double>(n);
  }
  out.loss = loss / static_cast<double>(n);
  return out;
}

Gradients backward_from_cache(const MlpModel& model, const ForwardCache& cache,
                              const Matrix& dlogits) {
  const std::size_t layers = model.num_layers();
  if (dlogits.rows() != cache.activations[0].rows() ||
      dlogits.cols() != model.num_classes())
    throw ShapeError("backward: dlogits shape mismatch");

  Gradients grads = ParamVector::zeros_like(model);
  const std::size_t n = dlogits.rows();
  Matrix delta = dlogits;
  for (std::size_t kk = layers; kk > 0; --kk) {
    const std::size_t k = kk - 1;
    const Matrix& a = cache.activations[k];
    Matrix& gw = grads.weights[k];
    auto& gb = grads.biases[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double* di = delta.row(i);
      const double* ai = a.row(i);
      for (std::size_t j = 0; j < gw.rows(); ++j) {
        const double dij = di[j];
        gb[j] += dij;
        double* gwj = gw.row(j);
        for (std::size_t cidx = 0; cidx < gw.cols(); ++cidx)
          gwj[cidx] += dij * ai[cidx];
      }
    }
    if (k > 0) {
      const Matrix& w = model.weights[k];
      const Matrix& z = cache.preacts[k - 1];
      Matrix prev(n, w.cols());
      for (std::size_t i = 0; i < n; ++i) {
        const double* di = delta.row(i);
        double* pi = prev.row(i);
        for (std::size_t j = 0; j < w.rows(); ++j) {
          const double dij = di[j];
          if (dij == 0.0) continue;
          const double* wj = w.row(j);
          for (std::size_t cidx = 0; cidx < w.cols(); ++cidx)
            pi[cidx] += dij * wj[cidx];
        }
        const double* zi = z.row(i);
        for (std::size_t cidx = 0; cidx < w.cols(); ++cidx)
          if (!(zi[cidx] > 0.0)) pi[cidx] = 0.0;  // relu passes only where z > 0
      }
      delta = std::move(prev);
    }
  }
  return grads;
}

Gradients backward(const MlpModel& model, const Batch& batch, const Matrix& dlogits) {
  ForwardCache cache = forward_cached(model, batch.features);
  return backward_from_cache(model, cache, dlogits);
}

void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& opt) {
  if (grads.weights.size() != model.weights.size())
    throw ShapeError("sgd_step: gradient layer count mismatch");
  const double lr = opt.learning_rate;
  const double mom = opt.momentum;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    Matrix& w = model.weights[k];
    const Matrix& g = grads.weights[k];
    Matrix& v = opt.velocity.weights[k];
    if (g.rows() != w.rows() || g.cols() != w.cols())
      throw ShapeError("sgd_step: weight gradient shape mismatch at layer " +
                       std::to_string(k));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.data()[i];
      if (!std::isfinite(gi)) {
        std::ostringstream msg;
        msg << "sgd_step: non-finite gradient at layer " << k << " weight["
            << i / w.cols() << "," << i % w.cols() << "]";
        throw NumericError(msg.str());
      }
      double& vi = v.data()[i];
      vi = mom * vi - lr * gi;
      w.data()[i] += vi;
    }
    auto& b = model.biases[k];
    const auto& gb = grads.biases[k];
    auto& vb = opt.velocity.biases[k];
    if (gb.size() != b.size())
      throw ShapeError("sgd_step: bias gradient shape mismatch at layer " +
                       std::to_string(k));
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!std::isfinite(gb[i])) {
        std::ostringstream msg;
        msg << "sgd_step: non-finite gradient at layer " << k << " bias[" << i << "]";
        throw NumericError(msg.str());
      }
      vb[i] = mom * vb[i] - lr * gb[i];
      b[i] += vb[i];
    }
  }
}

namespace {

double batch_loss(const MlpModel& model, const Batch& batch) {
  return cce_loss_and_grad(forward(model, batch), batch.labels).loss;
}

}  // namespace

double finite_diff_check(const MlpModel& model, const Batch& batch, double eps) {
  if (eps <= 0.0) throw ConfigError("finite_diff_check: eps must be positive");

  ForwardCache cache = forward_cached(model, batch.features);
  LossGrad lg = cce_loss_and_grad(cache.logits(), batch.labels);
  Gradients analytic = backward_from_cache(model, cache, lg.dlogits);

  MlpModel probe = model;
  double max_rel = 0.0;
  auto check_one = [&](double& slot, double a) {
    const double orig = slot;
    slot = orig + eps;
    const double lp = batch_loss(probe, batch);
    slot = orig - eps;
    const double lm = batch_loss(probe, batch);
    slot = orig;
    const double fd = (lp - lm) / (2.0 * eps);
    const double rel =
        std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
    max_rel = std::max(max_rel, rel);
  };
  for (std::size_t k = 0; k < probe.weights.size(); ++k) {
    for (std::size_t i = 0; i < probe.weights[k].size(); ++i)
      check_one(probe.weights[k].data()[i], analytic.weights[k].data()[i]);
    for (std::size_t i = 0; i < probe.biases[k].size(); ++i)
      check_one(probe.biases[k][i], analytic.biases[k][i]);
  }
  return max_rel;
}

bool bits_equal(const MlpModel& a, const MlpModel& b) {
  if (a.widths != b.widths) return false;
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    const auto& va = a.weights[k].values();
    const auto& vb = b.weights[k].values();
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0)
      return false;
    if (std::memcmp(a.biases[k].data(), b.biases[k].data(),
                    a.biases[k].size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace cil
