#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isonorm/matrix.hpp"
#include "isonorm/normalize.hpp"

namespace isonorm::distill {

struct LossConfig {
  enum class Kind { MSE, Cosine, HybridMSE, HybridSmoothL1 };
  Kind kind = Kind::MSE;
  double beta = 0.9;           // hybrid mix: 1 → pure cosine, 0 → pure MSE/SmoothL1
  double smooth_l1_delta = 1.0;
};

double loss_mse(const Matrix& x, const Matrix& y);
double loss_cosine(const Matrix& x, const Matrix& y);
double loss_hybrid(const Matrix& x, const Matrix& y, const LossConfig& cfg);
// Loss value plus analytic gradient w.r.t. x (same mean reduction as the loss).
double loss_and_grad(const LossConfig& cfg, const Matrix& x, const Matrix& y,
                     Matrix* grad);
// Per-sample (per-row) losses, for histograms.
Vector loss_per_sample(const LossConfig& cfg, const Matrix& x, const Matrix& y);

struct AdaLossState {
  Vector ema;
  double decay = 0.99;
  double eps = 1e-8;
  bool initialized = false;
};
struct AdaLossResult {
  AdaLossState state;
  Vector weights;  // 1 / max(EMA, ε)
};
AdaLossResult adaloss_update(AdaLossState state, const Vector& per_term_losses);

// Synthetic teacher: shared Gaussian latent through a fixed mixing, scaled and
// shifted per channel, plus teacher-private variation the student cannot
// predict (a structured component inside the per-channel budget and an
// additive white component with absolute σ = global_scale·noise_uniform_abs).
// Per-channel σ of the output is global_scale·channel_scale exactly, so
// Σ-ratio scenarios can be dialed in directly.
struct TeacherSpec {
  std::size_t latent_dim = 32;
  std::size_t channels = 64;
  Matrix mixing;         // channels×latent; rows unit-normalized at use; empty → random
  Vector channel_mean;   // empty → zeros
  Vector channel_scale;  // empty → ones; requires channel_scale ≥ noise_uniform_abs
  double global_scale = 1.0;
  double noise_structured_frac = 0.0;  // ∈ [0,1)
  double noise_uniform_abs = 0.0;
};

// `seed` drives the sample draws; `identity_seed` pins the teacher's random
// mixing matrices so independent batches (train vs. eval) come from the same
// function. Defaults to `seed`, which keeps single-batch uses self-contained.
Matrix make_teacher(const TeacherSpec& spec, std::size_t n, std::uint64_t seed,
                    std::optional<std::uint64_t> identity_seed = std::nullopt);

struct TeacherBatch {
  Matrix latent;                // n×L, shared across teachers
  std::vector<Matrix> outputs;  // per teacher, n×C_t
};
TeacherBatch make_teacher_set(const std::vector<TeacherSpec>& specs, std::size_t n,
                              std::uint64_t seed,
                              std::optional<std::uint64_t> identity_seed = std::nullopt);

struct DistillConfig {
  std::vector<TeacherSpec> teachers;
  Vector teacher_weights;  // α per teacher; empty → all 1
  // Target transform per teacher; nullopt → raw targets (the MSE baseline).
  std::vector<std::optional<normalize::Method>> methods;

  std::size_t student_width = 64;
  std::size_t student_depth = 0;  // 0 = linear trunk; 1 = one tanh hidden layer
  std::size_t steps = 2000;
  std::size_t batch_size = 256;
  double learning_rate = 0.05;
  std::size_t dataset_size = 20000;
  std::size_t eval_size = 2000;
  std::uint64_t seed = 0;
  LossConfig loss;
  bool use_adaloss = false;
  double adaloss_decay = 0.99;
  double adaloss_eps = 1e-8;
  std::size_t record_every = 10;
  std::size_t histogram_bins = 32;
};

struct StepRecord {
  std::size_t step;
  Vector train_loss;        // per teacher, configured loss on the step's minibatch
  Vector normalized_mse;    // per teacher, held-out eval set, normalized space
  Vector denormalized_mse;  // per teacher, original teacher space
};

struct TeacherReport {
  std::string method;  // "baseline" or the normalizer tag
  double final_normalized_mse = 0.0;
  double final_denormalized_mse = 0.0;
  Vector normalized_err_variance;
  Vector denormalized_err_variance;
  double normalized_range = 0.0;
  double denormalized_range = 0.0;
  Vector histogram_edges;                    // bins+1
  std::vector<std::size_t> histogram_counts; // per-sample normalized loss
};

struct DistillReport {
  std::uint64_t seed = 0;
  std::vector<StepRecord> trajectory;
  std::vector<TeacherReport> teachers;
  Vector adaloss_weights;  // empty unless AdaLoss was on

  nlohmann::json to_json() const;
};

DistillReport run_distillation(const DistillConfig& cfg);

DistillConfig config_from_json(const nlohmann::json& doc);

}  // namespace isonorm::distill
