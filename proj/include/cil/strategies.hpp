#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cil/nn.hpp"
#include "cil/stream.hpp"

namespace cil {

enum class StrategyKind { naive, joint, lwf, ewc, si, slda };

StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::naive;
  double lambda_lwf = 1.0;            // weight of the distillation term
  double distill_temperature = 2.0;
  double lambda_ewc = 100.0;
  double si_c = 0.1;
  double si_xi = 0.1;                 // damping in the SI importance update
  double slda_shrinkage = 1e-4;
  int epochs_per_experience = 10;
  int batch_size = 32;                // full batch when a chunk is smaller
};

void validate(const StrategyConfig& cfg);

// Frozen previous-experience model used as distillation teacher.
struct LwfState {
  std::optional<MlpModel> teacher;
};

// Online EWC: Fisher accumulates additively, one anchor refreshed per
// experience (the stream length is unknown in advance, so per-experience
// penalty lists would grow without bound).
struct EwcState {
  std::optional<ParamVector> fisher;
  std::optional<ParamVector> anchor;
};

struct SiState {
  bool initialized = false;
  ParamVector path;    // running -sum g * dtheta within the experience
  ParamVector omega;   // consolidated importance
  std::optional<ParamVector> anchor;
};

// Streaming LDA: per-class means, shared covariance, updated one sample at
// a time. The MLP is never touched.
struct SldaState {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  double shrinkage = 1e-4;
  Matrix means;                 // C x d
  std::vector<double> counts;   // per class
  Matrix cov;                   // d x d, pooled
  double total = 0.0;
};

bool slda_equal(const SldaState& a, const SldaState& b);

using StrategyState = std::variant<std::monostate, LwfState, EwcState, SiState, SldaState>;

StrategyState make_strategy_state(const StrategyConfig& cfg);

// Trains the model on one chunk (epochs of shuffled mini-batches with the
// strategy's loss augmentation) and updates the strategy state at the end.
// SLDA instead streams the chunk's samples through its statistics, in order.
void train_experience(StrategyState& state, MlpModel& model, OptimizerState& opt,
                      const Experience& exp, const StrategyConfig& cfg,
                      std::uint64_t seed);

// CCE(student, labels) + lambda * T^2 * mean KL(softmax(teacher/T) || softmax(student/T)),
// with the analytic gradient w.r.t. the student logits. lambda = 0 returns
// the plain CCE result unchanged.
LossGrad lwf_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                  const std::vector<int>& labels, double lambda, double temperature);

// Diagonal empirical Fisher, expectation taken over the model's own
// predictive distribution (deterministic; no label sampling):
//   F = mean_i sum_c p_c(x_i) * (d log p_c(x_i) / d theta)^2
ParamVector estimate_fisher(const MlpModel& model, const Experience& exp);

struct PenaltyGrad {
  double penalty = 0.0;
  Gradients grads;
};

// (lambda/2) sum F (theta - anchor)^2 and its gradient.
PenaltyGrad ewc_penalty(const MlpModel& model, const EwcState& state, double lambda_ewc);

// c * sum omega (theta - anchor)^2 and its gradient.
PenaltyGrad si_penalty(const MlpModel& model, const SiState& state, double c);

// Per-step path update: path -= g * dtheta (loss-reducing motion
// accumulates positive importance).
void si_accumulate(SiState& state, const Gradients& grads, const ParamVector& dtheta);

// End of experience: omega += max(path, 0) / ((theta_end - theta_start)^2 + xi),
// path resets, anchor moves to theta_end.
void si_consolidate(SiState& state, const ParamVector& theta_end,
                    const ParamVector& theta_start, double xi);

SldaState make_slda_state(std::size_t dim, std::size_t n_classes, double shrinkage);
void slda_fit_sample(SldaState& state, const std::vector<double>& feature, int label);

// Class scores w_c . x + b_c with w_c = S^-1 mu_c, b_c = -mu_c . w_c / 2,
// S = (1-eps) Sigma + eps I.
std::vector<double> slda_predict(const SldaState& state, const std::vector<double>& feature);

// Batch training on the union of all chunks; the reference the incremental
// strategies are compared against.
void joint_train(MlpModel& model, OptimizerState& opt, const Dataset& all_data,
                 const StrategyConfig& cfg, std::uint64_t seed);

// Logit-like class scores for evaluation: SLDA uses its discriminants,
// everything else the model's forward pass.
Matrix predict_scores(const StrategyState& state, const MlpModel& model,
                      const Matrix& features);

}  // namespace cil
