#include "cil/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

StrategyKind parse_strategy(const std::string& name) {
  if (name == "naive") return StrategyKind::naive;
  if (name == "joint") return StrategyKind::joint;
  if (name == "lwf") return StrategyKind::lwf;
  if (name == "ewc") return StrategyKind::ewc;
  if (name == "si") return StrategyKind::si;
  if (name == "slda") return StrategyKind::slda;
  throw ConfigError("unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::naive: return "naive";
    case StrategyKind::joint: return "joint";
    case StrategyKind::lwf: return "lwf";
    case StrategyKind::ewc: return "ewc";
    case StrategyKind::si: return "si";
    case StrategyKind::slda: return "slda";
  }
  throw ConfigError("unknown strategy kind");
}

void validate(const StrategyConfig& cfg) {
  if (cfg.lambda_lwf < 0.0) throw ConfigError("lambda must be non-negative");
  if (cfg.distill_temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (cfg.lambda_ewc < 0.0) throw ConfigError("lambda_ewc must be non-negative");
  if (cfg.si_c < 0.0) throw ConfigError("si_c must be non-negative");
  if (cfg.si_xi <= 0.0) throw ConfigError("si_xi must be positive");
  if (cfg.slda_shrinkage <= 0.0 || cfg.slda_shrinkage >= 1.0)
    throw ConfigError("slda_shrinkage must lie in (0,1)");
  if (cfg.epochs_per_experience < 1) throw ConfigError("epochs must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
}

StrategyState make_strategy_state(const StrategyConfig& cfg) {
  switch (cfg.kind) {
    case StrategyKind::lwf: return LwfState{};
    case StrategyKind::ewc: return EwcState{};
    case StrategyKind::si: return SiState{};
    case StrategyKind::slda: return SldaState{};
    default: return std::monostate{};
  }
}

LossGrad lwf_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                  const std::vector<int>& labels, double lambda, double temperature) {
  if (temperature <= 0.0) throw ConfigError("lwf_loss: temperature must be positive");
  if (student_logits.rows() != teacher_logits.rows() ||
      student_logits.cols() != teacher_logits.cols())
    throw ShapeError("lwf_loss: student/teacher logit shapes differ");

  LossGrad out = cce_loss_and_grad(student_logits, labels);
  if (lambda == 0.0) return out;

  const std::size_t n = student_logits.rows();
  const std::size_t c = student_logits.cols();
  Matrix soft_student(n, c);
  Matrix soft_teacher(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      soft_student(i, k) = student_logits(i, k) / temperature;
      soft_teacher(i, k) = teacher_logits(i, k) / temperature;
    }
  const Matrix ps = softmax_rows(soft_student);
  const Matrix pt = softmax_rows(soft_teacher);

  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const double t = pt(i, k);
      if (t > 0.0) kl += t * (std::log(t) - std::log(ps(i, k)));
    }
  kl /= static_cast<double>(n);

  out.loss += lambda * temperature * temperature * kl;
  // d/ds of lambda*T^2*mean KL = lambda*T*(ps - pt)/n
  const double scale = lambda * temperature / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k)
      out.dlogits(i, k) += scale * (ps(i, k) - pt(i, k));
  return out;
}

ParamVector estimate_fisher(const MlpModel& model, const Experience& exp) {
  if (exp.samples.empty()) throw StreamError("estimate_fisher: empty experience");

  ParamVector fisher = ParamVector::zeros_like(model);
  const std::size_t c = model.num_classes();
  Matrix features(1, model.input_dim());
  for (const Sample& s : exp.samples) {
    if (s.features.size() != model.input_dim())
      throw ShapeError("estimate_fisher: feature dim mismatch");
    std::copy(s.features.begin(), s.features.end(), features.row(0));
    ForwardCache cache = forward_cached(model, features);
    const Matrix probs = softmax_rows(cache.logits());
    for (std::size_t k = 0; k < c; ++k) {
      const double pk = probs(0, k);
      // d log p_k / d logits = onehot_k - p
      Matrix dlogits(1, c);
      for (std::size_t j = 0; j < c; ++j) dlogits(0, j) = -probs(0, j);
      dlogits(0, k) += 1.0;
      Gradients g = backward_from_cache(model, cache, dlogits);
      param_zip([pk](double& f, double gv) { f += pk * gv * gv; }, fisher, g);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(exp.samples.size());
  param_zip([inv_n](double& f) { f *= inv_n; }, fisher);
  return fisher;
}

PenaltyGrad ewc_penalty(const MlpModel& model, const EwcState& state, double lambda_ewc) {
  if (!state.fisher || !state.anchor)
    throw StateError("ewc_penalty: no Fisher/anchor consolidated yet");
  PenaltyGrad out;
  out.grads = ParamVector::zeros_like(model);
  double sum = 0.0;
  param_zip(
      [&](double& g, double theta, double f, double anchor) {
        const double d = theta - anchor;
        sum += f * d * d;
        g = lambda_ewc * f * d;
      },
      out.grads, model, *state.fisher, *state.anchor);
  out.penalty = 0.5 * lambda_ewc * sum;
  return out;
}

PenaltyGrad si_penalty(const MlpModel& model, const SiState& state, double c) {
  if (!state.anchor) throw StateError("si_penalty: no anchor consolidated yet");
  PenaltyGrad out;
  out.grads = ParamVector::zeros_like(model);
  double sum = 0.0;
  param_zip(
      [&](double& g, double theta, double omega, double anchor) {
        const double d = theta - anchor;
        sum += omega * d * d;
        g = 2.0 * c * omega * d;
      },
      out.grads, model, state.omega, *state.anchor);
  out.penalty = c * sum;
  return out;
}

void si_accumulate(SiState& state, const Gradients& grads, const ParamVector& dtheta) {
  param_zip([](double& path, double g, double d) { path -= g * d; }, state.path,
            grads, dtheta);
}

void si_consolidate(SiState& state, const ParamVector& theta_end,
                    const ParamVector& theta_start, double xi) {
  if (xi <= 0.0) throw ConfigError("si_consolidate: xi must be positive");
  param_zip(
      [xi](double& omega, double path, double end, double start) {
        const double move = end - start;
        omega += std::max(path, 0.0) / (move * move + xi);
      },
      state.omega, state.path, theta_end, theta_start);
  param_zip([](double& p) { p = 0.0; }, state.path);
  state.anchor = theta_end;
}

SldaState make_slda_state(std::size_t dim, std::size_t n_classes, double shrinkage) {
  if (dim == 0 || n_classes == 0) throw ConfigError("slda: dim/classes must be positive");
  if (shrinkage <= 0.0 || shrinkage >= 1.0)
    throw ConfigError("slda: shrinkage must lie in (0,1)");
  SldaState st;
  st.dim = dim;
  st.n_classes = n_classes;
  st.shrinkage = shrinkage;
  st.means = Matrix(n_classes, dim);
  st.counts.assign(n_classes, 0.0);
  st.cov = Matrix(dim, dim);
  return st;
}

bool slda_equal(const SldaState& a, const SldaState& b) {
  return a.dim == b.dim && a.n_classes == b.n_classes && a.shrinkage == b.shrinkage &&
         a.means == b.means && a.counts == b.counts && a.cov == b.cov &&
         a.total == b.total;
}

void slda_fit_sample(SldaState& state, const std::vector<double>& feature, int label) {
  if (feature.size() != state.dim) throw ShapeError("slda_fit_sample: feature dim mismatch");
  if (label < 0 || static_cast<std::size_t>(label) >= state.n_classes)
    throw LabelError("slda_fit_sample: label " + std::to_string(label) + " out of range");

  const std::size_t d = state.dim;
  const double t = state.total;
  double* mu = state.means.row(static_cast<std::size_t>(label));

  // Pooled covariance, rank-1 streaming update against the pre-update
  // class mean: Sigma <- (t*Sigma + t/(t+1) * dd^T) / (t+1)
  if (t > 0.0) {
    const double w = t / (t + 1.0);
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < d; ++i) diff[i] = feature[i] - mu[i];
    for (std::size_t i = 0; i < d; ++i) {
      double* row = state.cov.row(i);
      const double di = diff[i] * w;
      for (std::size_t j = 0; j < d; ++j) row[j] = (t * row[j] + di * diff[j]) / (t + 1.0);
    }
  }

  const double n_c = state.counts[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < d; ++i) mu[i] = (n_c * mu[i] + feature[i]) / (n_c + 1.0);
  state.counts[static_cast<std::size_t>(label)] = n_c + 1.0;
  state.total = t + 1.0;
}

namespace {

// w (d x C) and per-class biases of the shrunken-covariance discriminant.
std::pair<Matrix, std::vector<double>> slda_discriminants(const SldaState& state) {
  if (state.total == 0.0) throw StateError("slda_predict: no samples fitted yet");
  const std::size_t d = state.dim;
  const double eps = state.shrinkage;
  Matrix shrunk(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      shrunk(i, j) = (1.0 - eps) * state.cov(i, j) + (i == j ? eps : 0.0);

  Matrix mu_t(d, state.n_classes);
  for (std::size_t c = 0; c < state.n_classes; ++c)
    for (std::size_t i = 0; i < d; ++i) mu_t(i, c) = state.means(c, i);
  Matrix w = cholesky_solve(shrunk, mu_t);

  std::vector<double> bias(state.n_classes);
  for (std::size_t c = 0; c < state.n_classes; ++c) {
    double b = 0.0;
    for (std::size_t i = 0; i < d; ++i) b += w(i, c) * state.means(c, i);
    bias[c] = -0.5 * b;
  }
  return {std::move(w), std::move(bias)};
}

}  // namespace

std::vector<double> slda_predict(const SldaState& state, const std::vector<double>& feature) {
  const auto [w, bias] = slda_discriminants(state);
  if (feature.size() != state.dim) throw ShapeError("slda_predict: feature dim mismatch");
  std::vector<double> scores(state.n_classes);
  for (std::size_t c = 0; c < state.n_classes; ++c) {
    double dot = 0.0;
    for (std::size_t i = 0; i < state.dim; ++i) dot += w(i, c) * feature[i];
    scores[c] = dot + bias[c];
  }
  return scores;
}

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

namespace {

Batch gather_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& order,
                   std::size_t begin, std::size_t end, std::size_t dim) {
  Batch batch;
  batch.features = Matrix(end - begin, dim);
  batch.labels.resize(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& s = samples[order[i]];
    std::copy(s.features.begin(), s.features.end(), batch.features.row(i - begin));
    batch.labels[i - begin] = s.label;
  }
  return batch;
}

void add_grads(Gradients& into, const Gradients& extra) {
  param_zip([](double& g, double e) { g += e; }, into, extra);
}

// Epoch/mini-batch SGD shared by naive, joint, LwF, EWC and SI. The data
// RNG depends only on (seed, experience index, epoch), so two strategies
// given the same seed see the same mini-batch sequence.
void train_gradient_strategy(StrategyState& state, MlpModel& model, OptimizerState& opt,
                             const Experience& exp, const StrategyConfig& cfg,
                             std::uint64_t seed) {
  const std::size_t n = exp.samples.size();
  const std::size_t dim = model.input_dim();
  for (const Sample& s : exp.samples)
    if (s.features.size() != dim)
      throw ShapeError("train_experience: feature dim mismatch in experience " +
                       std::to_string(exp.index));

  auto* lwf = std::get_if<LwfState>(&state);
  auto* ewc = std::get_if<EwcState>(&state);
  auto* si = std::get_if<SiState>(&state);
  if (si && !si->initialized) {
    si->path = ParamVector::zeros_like(model);
    si->omega = ParamVector::zeros_like(model);
    si->initialized = true;
  }

  const bool distill = lwf && lwf->teacher.has_value() && cfg.lambda_lwf != 0.0;
  const bool ewc_active = ewc && ewc->anchor.has_value() && cfg.lambda_ewc != 0.0;
  const bool si_active = si && si->anchor.has_value() && cfg.si_c != 0.0;

  const ParamVector theta_start = si ? snapshot_params(model) : ParamVector{};

  const std::size_t batch_size =
      n < static_cast<std::size_t>(cfg.batch_size)
          ? n
          : static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < cfg.epochs_per_experience; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, {seed_tag::train, static_cast<std::uint64_t>(exp.index),
                               static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);

    for (std::size_t begin = 0; begin < n; begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, n);
      Batch batch = gather_batch(exp.samples, order, begin, end, dim);

      ForwardCache cache = forward_cached(model, batch.features);
      LossGrad lg;
      if (distill) {
        const Matrix teacher_logits = forward(*lwf->teacher, batch);
        lg = lwf_loss(cache.logits(), teacher_logits, batch.labels, cfg.lambda_lwf,
                      cfg.distill_temperature);
      } else {
        lg = cce_loss_and_grad(cache.logits(), batch.labels);
      }
      Gradients grads = backward_from_cache(model, cache, lg.dlogits);
      if (ewc_active) add_grads(grads, ewc_penalty(model, *ewc, cfg.lambda_ewc).grads);
      if (si_active) add_grads(grads, si_penalty(model, *si, cfg.si_c).grads);

      if (si) {
        const ParamVector before = snapshot_params(model);
        sgd_step(model, grads, opt);
        ParamVector delta = snapshot_params(model);
        param_zip([](double& d, double b) { d -= b; }, delta, before);
        si_accumulate(*si, grads, delta);
      } else {
        sgd_step(model, grads, opt);
      }
    }
  }

  // End-of-experience state updates.
  if (lwf) lwf->teacher = model;
  if (ewc) {
    ParamVector fisher = estimate_fisher(model, exp);
    if (ewc->fisher) {
      param_zip([](double& f, double fn) { f += fn; }, *ewc->fisher, fisher);
    } else {
      ewc->fisher = std::move(fisher);
    }
    ewc->anchor = snapshot_params(model);
  }
  if (si) si_consolidate(*si, snapshot_params(model), theta_start, cfg.si_xi);
}

}  // namespace

void train_experience(StrategyState& state, MlpModel& model, OptimizerState& opt,
                      const Experience& exp, const StrategyConfig& cfg,
                      std::uint64_t seed) {
  validate(cfg);
  if (exp.samples.empty())
    throw StreamError("train_experience: empty experience " + std::to_string(exp.index));

  if (auto* slda = std::get_if<SldaState>(&state)) {
    if (slda->dim == 0)
      *slda = make_slda_state(exp.samples.front().features.size(),
                              model.num_classes(), cfg.slda_shrinkage);
    for (const Sample& s : exp.samples) slda_fit_sample(*slda, s.features, s.label);
    return;
  }
  train_gradient_strategy(state, model, opt, exp, cfg, seed);
}

void joint_train(MlpModel& model, OptimizerState& opt, const Dataset& all_data,
                 const StrategyConfig& cfg, std::uint64_t seed) {
  if (all_data.samples.empty()) throw StreamError("joint_train: empty dataset");
  Experience exp;
  exp.index = 1;
  exp.samples = all_data.samples;
  StrategyState none = std::monostate{};
  StrategyConfig plain = cfg;
  plain.kind = StrategyKind::joint;
  train_experience(none, model, opt, exp, plain, seed);
}

Matrix predict_scores(const StrategyState& state, const MlpModel& model,
                      const Matrix& features) {
  if (const auto* slda = std::get_if<SldaState>(&state)) {
    if (features.cols() != slda->dim)
      throw ShapeError("predict_scores: feature dim mismatch");
    const auto [w, bias] = slda_discriminants(*slda);  // factor once per batch
    Matrix scores(features.rows(), slda->n_classes);
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const double* x = features.row(i);
      for (std::size_t c = 0; c < slda->n_classes; ++c) {
        double dot = 0.0;
        for (std::size_t k = 0; k < slda->dim; ++k) dot += w(k, c) * x[k];
        scores(i, c) = dot + bias[c];
      }
    }
    return scores;
  }
  return forward_cached(model, features).logits();
}

}  // namespace cil
