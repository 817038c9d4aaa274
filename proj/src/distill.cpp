#include "isonorm/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isonorm/errors.hpp"
#include "isonorm/kernels.hpp"
#include "isonorm/analysis.hpp"
#include "isonorm/rng.hpp"

namespace isonorm::distill {

using normalize::Method;
using normalize::Normalizer;

namespace {

void check_same_shape(const Matrix& x, const Matrix& y, const char* who) {
  if (x.rows != y.rows || x.cols != y.cols)
    throw ShapeError(std::string(who) + ": prediction/target shape mismatch");
}

double mse_core(const Matrix& x, const Matrix& y, Matrix* grad) {
  const double inv = 1.0 / double(x.data.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    acc += d * d;
    if (grad) grad->data[i] += 2.0 * d * inv;
  }
  return acc * inv;
}

double smooth_l1_core(const Matrix& x, const Matrix& y, double delta, Matrix* grad) {
  const double inv = 1.0 / double(x.data.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    const double a = std::abs(d);
    if (a <= delta) {
      acc += 0.5 * d * d / delta;
      if (grad) grad->data[i] += (d / delta) * inv;
    } else {
      acc += a - 0.5 * delta;
      if (grad) grad->data[i] += (d > 0.0 ? 1.0 : -1.0) * inv;
    }
  }
  return acc * inv;
}

// Mean over rows of 1 − cos(x_i, y_i); a zero-norm row contributes loss 1
// with zero gradient (the subgradient choice at the singularity).
double cosine_core(const Matrix& x, const Matrix& y, Matrix* grad) {
  const std::size_t n = x.rows, c = x.cols;
  const double inv = 1.0 / double(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = x[i];
    const double* yr = y[i];
    double dot = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dot += xr[j] * yr[j];
      nx2 += xr[j] * xr[j];
      ny2 += yr[j] * yr[j];
    }
    if (nx2 <= 0.0 || ny2 <= 0.0) {
      acc += 1.0;
      continue;
    }
    const double nx = std::sqrt(nx2), ny = std::sqrt(ny2);
    const double cosv = dot / (nx * ny);
    acc += 1.0 - cosv;
    if (grad) {
      double* gr = (*grad)[i];
      const double s = inv / (nx * ny);
      const double t = inv * cosv / nx2;
      for (std::size_t j = 0; j < c; ++j) gr[j] += t * xr[j] - s * yr[j];
    }
  }
  return acc * inv;
}

double loss_core(const LossConfig& cfg, const Matrix& x, const Matrix& y,
                 Matrix* grad) {
  check_same_shape(x, y, "loss");
  if (grad && (grad->rows != x.rows || grad->cols != x.cols)) *grad = Matrix(x.rows, x.cols);
  if (grad) std::fill(grad->data.begin(), grad->data.end(), 0.0);
  switch (cfg.kind) {
    case LossConfig::Kind::MSE:
      return mse_core(x, y, grad);
    case LossConfig::Kind::Cosine:
      return cosine_core(x, y, grad);
    case LossConfig::Kind::HybridMSE:
    case LossConfig::Kind::HybridSmoothL1: {
      if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0))
        throw Error(ErrorCode::Usage, "hybrid loss: beta must lie in [0, 1]");
      Matrix part;
      Matrix* pg = grad ? &part : nullptr;
      if (pg) part = Matrix(x.rows, x.cols);
      const double lc = cosine_core(x, y, pg);
      if (grad)
        for (std::size_t i = 0; i < grad->data.size(); ++i)
          grad->data[i] += cfg.beta * part.data[i];
      if (pg) std::fill(part.data.begin(), part.data.end(), 0.0);
      const double lm = cfg.kind == LossConfig::Kind::HybridMSE
                            ? mse_core(x, y, pg)
                            : smooth_l1_core(x, y, cfg.smooth_l1_delta, pg);
      if (grad)
        for (std::size_t i = 0; i < grad->data.size(); ++i)
          grad->data[i] += (1.0 - cfg.beta) * part.data[i];
      return cfg.beta * lc + (1.0 - cfg.beta) * lm;
    }
  }
  throw Error(ErrorCode::Usage, "loss: unknown kind");
}

}  // namespace

double loss_mse(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "loss_mse");
  return mse_core(x, y, nullptr);
}

double loss_cosine(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "loss_cosine");
  return cosine_core(x, y, nullptr);
}

double loss_hybrid(const Matrix& x, const Matrix& y, const LossConfig& cfg) {
  return loss_core(cfg, x, y, nullptr);
}

double loss_and_grad(const LossConfig& cfg, const Matrix& x, const Matrix& y,
                     Matrix* grad) {
  return loss_core(cfg, x, y, grad);
}

Vector loss_per_sample(const LossConfig& cfg, const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "loss_per_sample");
  const std::size_t n = x.rows, c = x.cols;
  Vector out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = x[i];
    const double* yr = y[i];
    double sq = 0.0, sl1 = 0.0, dot = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xr[j] - yr[j];
      sq += d * d;
      const double a = std::abs(d);
      sl1 += a <= cfg.smooth_l1_delta ? 0.5 * d * d / cfg.smooth_l1_delta
                                      : a - 0.5 * cfg.smooth_l1_delta;
      dot += xr[j] * yr[j];
      nx2 += xr[j] * xr[j];
      ny2 += yr[j] * yr[j];
    }
    const double mse = sq / double(c);
    const double cosl = (nx2 <= 0.0 || ny2 <= 0.0)
                            ? 1.0
                            : 1.0 - dot / std::sqrt(nx2 * ny2);
    switch (cfg.kind) {
      case LossConfig::Kind::MSE: out[i] = mse; break;
      case LossConfig::Kind::Cosine: out[i] = cosl; break;
      case LossConfig::Kind::HybridMSE:
        out[i] = cfg.beta * cosl + (1.0 - cfg.beta) * mse;
        break;
      case LossConfig::Kind::HybridSmoothL1:
        out[i] = cfg.beta * cosl + (1.0 - cfg.beta) * sl1 / double(c);
        break;
    }
  }
  return out;
}

AdaLossResult adaloss_update(AdaLossState state, const Vector& per_term_losses) {
  if (!(state.decay > 0.0 && state.decay < 1.0))
    throw Error(ErrorCode::Usage, "adaloss: decay must lie in (0, 1)");
  if (!(state.eps > 0.0))
    throw Error(ErrorCode::Usage, "adaloss: eps must be positive");
  for (double v : per_term_losses)
    if (!std::isfinite(v) || v < 0.0)
      throw NonFiniteInput("adaloss: losses must be finite and non-negative");

  if (!state.initialized) {
    state.ema = per_term_losses;
    state.initialized = true;
  } else {
    if (state.ema.size() != per_term_losses.size())
      throw ShapeError("adaloss: loss count changed between updates");
    for (std::size_t i = 0; i < state.ema.size(); ++i)
      state.ema[i] = state.decay * state.ema[i] +
                     (1.0 - state.decay) * per_term_losses[i];
  }
  AdaLossResult out;
  out.weights.resize(state.ema.size());
  for (std::size_t i = 0; i < state.ema.size(); ++i)
    out.weights[i] = 1.0 / std::max(state.ema[i], state.eps);
  out.state = std::move(state);
  return out;
}

namespace {

Matrix row_normalized(Matrix m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    double* row = m[i];
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * row[j];
    if (s > 0.0) {
      const double inv = 1.0 / std::sqrt(s);
      for (std::size_t j = 0; j < m.cols; ++j) row[j] *= inv;
    }
  }
  return m;
}

void validate_spec(const TeacherSpec& spec) {
  if (spec.latent_dim == 0 || spec.channels == 0)
    throw ShapeError("teacher: latent_dim and channels must be positive");
  if (!spec.mixing.empty() &&
      (spec.mixing.rows != spec.channels || spec.mixing.cols != spec.latent_dim))
    throw ShapeError("teacher: mixing must be channels x latent_dim");
  if (!spec.channel_mean.empty() && spec.channel_mean.size() != spec.channels)
    throw ShapeError("teacher: channel_mean size mismatch");
  if (!spec.channel_scale.empty() && spec.channel_scale.size() != spec.channels)
    throw ShapeError("teacher: channel_scale size mismatch");
  if (!(spec.global_scale >= 0.0) || !std::isfinite(spec.global_scale))
    throw Error(ErrorCode::Usage, "teacher: global_scale must be finite and >= 0");
  if (!(spec.noise_structured_frac >= 0.0 && spec.noise_structured_frac < 1.0))
    throw Error(ErrorCode::Usage, "teacher: noise_structured_frac must lie in [0, 1)");
  if (!(spec.noise_uniform_abs >= 0.0))
    throw Error(ErrorCode::Usage, "teacher: noise_uniform_abs must be >= 0");
  for (std::size_t c = 0; c < spec.channel_scale.size(); ++c)
    if (spec.channel_scale[c] < spec.noise_uniform_abs)
      throw Error(ErrorCode::Usage,
                  "teacher: channel_scale must be >= noise_uniform_abs so the "
                  "white-noise budget fits inside each channel's variance");
}

// One teacher's outputs from a shared latent. The per-channel variance budget
// scale_c² splits into a white part u² and a unit-variance mixed part scaled
// by sqrt(scale_c²−u²); the mixed part itself splits (1−f)/f between the
// shared latent and a teacher-private latent. Per-channel σ of the result is
// exactly global_scale·scale_c.
Matrix teacher_outputs(const TeacherSpec& spec, const Matrix& latent,
                       const CounterRng& identity, const CounterRng& draws) {
  validate_spec(spec);
  if (latent.cols != spec.latent_dim)
    throw ShapeError("teacher: latent width does not match latent_dim");
  const std::size_t n = latent.rows, cdim = spec.channels;

  // Mixing matrices come from the identity stream: they define *which*
  // function the teacher is, and must not change between batches.
  CounterRng mix_rng = identity.fork(0);
  Matrix mixing = spec.mixing.empty()
                      ? normal_matrix(mix_rng, cdim, spec.latent_dim)
                      : spec.mixing;
  mixing = row_normalized(std::move(mixing));

  Matrix out = kernels::matmul_nt(latent, mixing);  // n×C shared signal

  const double f = spec.noise_structured_frac;
  const double a = std::sqrt(1.0 - f);
  const double b = std::sqrt(f);
  if (f > 0.0) {
    CounterRng priv_mix = identity.fork(1);
    Matrix noise_mixing = row_normalized(normal_matrix(priv_mix, cdim, cdim));
    CounterRng priv_lat = draws.fork(2);
    Matrix private_latent = normal_matrix(priv_lat, n, cdim);
    Matrix structured = kernels::matmul_nt(private_latent, noise_mixing);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = a * out.data[i] + b * structured.data[i];
  }

  const double u = spec.noise_uniform_abs;
  CounterRng white = draws.fork(3);
  const double g = spec.global_scale;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out[i];
    for (std::size_t c = 0; c < cdim; ++c) {
      const double sc = spec.channel_scale.empty() ? 1.0 : spec.channel_scale[c];
      const double mu = spec.channel_mean.empty() ? 0.0 : spec.channel_mean[c];
      const double s_eff = std::sqrt(std::max(sc * sc - u * u, 0.0));
      const double w = u > 0.0 ? white.normal() : 0.0;
      row[c] = mu + g * (s_eff * row[c] + u * w);
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  CounterRng r = CounterRng(seed).fork(tag);
  return r.next_u64();
}

}  // namespace

Matrix make_teacher(const TeacherSpec& spec, std::size_t n, std::uint64_t seed,
                    std::optional<std::uint64_t> identity_seed) {
  if (n == 0) throw InsufficientData("make_teacher: need at least one sample");
  CounterRng root(seed);
  CounterRng id_root(identity_seed.value_or(seed));
  CounterRng lat = root.fork(1);
  Matrix latent = normal_matrix(lat, n, spec.latent_dim);
  return teacher_outputs(spec, latent, id_root.fork(100), root.fork(100));
}

TeacherBatch make_teacher_set(const std::vector<TeacherSpec>& specs, std::size_t n,
                              std::uint64_t seed,
                              std::optional<std::uint64_t> identity_seed) {
  if (specs.empty()) throw Error(ErrorCode::Usage, "make_teacher_set: no teachers");
  if (n == 0) throw InsufficientData("make_teacher_set: need at least one sample");
  for (const TeacherSpec& s : specs)
    if (s.latent_dim != specs.front().latent_dim)
      throw ShapeError("make_teacher_set: all teachers must share latent_dim");

  CounterRng root(seed);
  CounterRng id_root(identity_seed.value_or(seed));
  TeacherBatch batch;
  CounterRng lat = root.fork(1);
  batch.latent = normal_matrix(lat, n, specs.front().latent_dim);
  batch.outputs.reserve(specs.size());
  for (std::size_t t = 0; t < specs.size(); ++t)
    batch.outputs.push_back(teacher_outputs(specs[t], batch.latent,
                                            id_root.fork(100 + t),
                                            root.fork(100 + t)));
  return batch;
}

namespace {

// Biasless student: linear trunk (depth 0) or one tanh hidden layer (depth 1),
// plus one zero-initialized linear head per teacher.
struct Student {
  std::size_t depth = 0;
  Matrix a1;               // width×latent
  Matrix a2;               // width×width (depth 1 only)
  std::vector<Matrix> heads;

  Matrix hidden_pre;       // scratch from the last forward (depth 1)

  Matrix forward(const Matrix& z) {
    if (depth == 0) return kernels::matmul_nt(z, a1);
    hidden_pre = kernels::matmul_nt(z, a1);
    Matrix g = hidden_pre;
    for (double& v : g.data) v = std::tanh(v);
    hidden_pre = std::move(g);  // keep activations for backward
    return kernels::matmul_nt(hidden_pre, a2);
  }

  // Gradient of the trunk parameters given dL/dH; returns nothing, accumulates
  // into da1/da2 (callers own the buffers so shapes are checked once).
  void backward(const Matrix& z, const Matrix& dh, Matrix& da1, Matrix& da2) const {
    if (depth == 0) {
      da1 = kernels::matmul_tn(dh, z);
      return;
    }
    da2 = kernels::matmul_tn(dh, hidden_pre);
    Matrix dg = kernels::matmul(dh, a2);
    for (std::size_t i = 0; i < dg.data.size(); ++i) {
      const double t = hidden_pre.data[i];
      dg.data[i] *= 1.0 - t * t;
    }
    da1 = kernels::matmul_tn(dg, z);
  }
};

Vector channel_variance_of(const Matrix& m) {
  const std::size_t n = m.rows, c = m.cols;
  Vector mean(c, 0.0), var(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) mean[j] += m[i][j];
  for (std::size_t j = 0; j < c; ++j) mean[j] /= double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = m[i][j] - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) var[j] /= double(n - 1);
  return var;
}

double mean_sq(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data) acc += v * v;
  return acc / double(m.data.size());
}

void validate_config(const DistillConfig& cfg) {
  if (cfg.teachers.empty())
    throw Error(ErrorCode::Usage, "distill: at least one teacher required");
  if (!cfg.methods.empty() && cfg.methods.size() != cfg.teachers.size())
    throw ShapeError("distill: methods list must match teacher count");
  if (!cfg.teacher_weights.empty() &&
      cfg.teacher_weights.size() != cfg.teachers.size())
    throw ShapeError("distill: teacher_weights must match teacher count");
  for (double w : cfg.teacher_weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorCode::Usage, "distill: teacher weights must be finite and >= 0");
  if (cfg.steps == 0) throw Error(ErrorCode::Usage, "distill: steps must be >= 1");
  if (cfg.batch_size == 0 || cfg.batch_size > cfg.dataset_size)
    throw Error(ErrorCode::Usage, "distill: need 1 <= batch_size <= dataset_size");
  if (cfg.eval_size < 2)
    throw Error(ErrorCode::Usage, "distill: eval_size must be >= 2");
  if (cfg.student_width == 0)
    throw Error(ErrorCode::Usage, "distill: student_width must be positive");
  if (cfg.student_depth > 1)
    throw Error(ErrorCode::Usage, "distill: student_depth must be 0 or 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw Error(ErrorCode::Usage, "distill: learning_rate must be positive");
  if (cfg.record_every == 0)
    throw Error(ErrorCode::Usage, "distill: record_every must be >= 1");
  if (cfg.histogram_bins == 0)
    throw Error(ErrorCode::Usage, "distill: histogram_bins must be >= 1");
}

}  // namespace

DistillReport run_distillation(const DistillConfig& cfg) {
  validate_config(cfg);
  const std::size_t nteach = cfg.teachers.size();
  const std::size_t latent_dim = cfg.teachers.front().latent_dim;

  // Independent sample draws for the two splits, one shared teacher identity.
  TeacherBatch train = make_teacher_set(cfg.teachers, cfg.dataset_size,
                                        derive_seed(cfg.seed, 0xD5), cfg.seed);
  TeacherBatch eval = make_teacher_set(cfg.teachers, cfg.eval_size,
                                       derive_seed(cfg.seed, 0xE7), cfg.seed);

  // Per-teacher target transform fitted on the training outputs.
  std::vector<std::optional<Normalizer>> nrms(nteach);
  std::vector<Matrix> targets(nteach), eval_targets(nteach);
  for (std::size_t t = 0; t < nteach; ++t) {
    const bool normalized = !cfg.methods.empty() && cfg.methods[t].has_value();
    if (normalized) {
      moments::FinalizedMoments stats = moments::compute_moments(train.outputs[t]);
      nrms[t] = normalize::fit(*cfg.methods[t], stats);
      targets[t] = normalize::apply(*nrms[t], train.outputs[t]);
      eval_targets[t] = normalize::apply(*nrms[t], eval.outputs[t]);
    } else {
      targets[t] = train.outputs[t];
      eval_targets[t] = eval.outputs[t];
    }
  }

  Vector weights = cfg.teacher_weights.empty() ? Vector(nteach, 1.0)
                                               : cfg.teacher_weights;

  Student student;
  student.depth = cfg.student_depth;
  {
    CounterRng init = CounterRng(cfg.seed).fork(0x171);
    student.a1 = normal_matrix(init, cfg.student_width, latent_dim);
    for (double& v : student.a1.data) v /= std::sqrt(double(latent_dim));
    if (cfg.student_depth == 1) {
      student.a2 = normal_matrix(init, cfg.student_width, cfg.student_width);
      for (double& v : student.a2.data) v /= std::sqrt(double(cfg.student_width));
    }
    student.heads.reserve(nteach);
    for (std::size_t t = 0; t < nteach; ++t)
      student.heads.emplace_back(cfg.teachers[t].channels, cfg.student_width);
  }

  AdaLossState ada;
  ada.decay = cfg.adaloss_decay;
  ada.eps = cfg.adaloss_eps;
  Vector ada_weights;

  DistillReport report;
  report.seed = cfg.seed;

  // Held-out metrics at the student's current parameters.
  auto eval_metrics = [&](Vector& nmse, Vector& dmse,
                          std::vector<Matrix>* errs_out) {
    Matrix h = student.forward(eval.latent);
    nmse.assign(nteach, 0.0);
    dmse.assign(nteach, 0.0);
    for (std::size_t t = 0; t < nteach; ++t) {
      Matrix pred = kernels::matmul_nt(h, student.heads[t]);
      Matrix err = pred;
      for (std::size_t i = 0; i < err.data.size(); ++i)
        err.data[i] -= eval_targets[t].data[i];
      nmse[t] = mean_sq(err);
      if (nrms[t]) {
        // Back-mapping the error is exactly invert(pred) − raw target: the
        // offsets cancel and only the inverse linear part remains.
        Matrix denorm;
        switch (nrms[t]->kind) {
          case normalize::TransformKind::Scalar:
            denorm = err;
            for (double& v : denorm.data) v *= nrms[t]->inverse_scale;
            break;
          case normalize::TransformKind::Diagonal:
            denorm = err;
            for (std::size_t i = 0; i < denorm.rows; ++i)
              for (std::size_t j = 0; j < denorm.cols; ++j)
                denorm[i][j] *= nrms[t]->inverse_diag[j];
            break;
          case normalize::TransformKind::Dense:
            denorm = kernels::matmul_nt(err, nrms[t]->inverse_mat);
            break;
        }
        dmse[t] = mean_sq(denorm);
      } else {
        dmse[t] = nmse[t];
      }
      if (errs_out) (*errs_out)[t] = std::move(err);
    }
  };

  Matrix zb(cfg.batch_size, latent_dim);
  std::vector<Matrix> tb(nteach);
  Vector step_losses(nteach, 0.0);
  CounterRng batch_rng = CounterRng(cfg.seed).fork(0xBA7C);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // Minibatch gather (with replacement).
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = batch_rng.uniform_index(cfg.dataset_size);
      for (std::size_t j = 0; j < latent_dim; ++j)
        zb[b][j] = train.latent[idx][j];
      for (std::size_t t = 0; t < nteach; ++t) {
        const std::size_t c = cfg.teachers[t].channels;
        if (tb[t].rows != cfg.batch_size) tb[t] = Matrix(cfg.batch_size, c);
        for (std::size_t j = 0; j < c; ++j) tb[t][b][j] = targets[t][idx][j];
      }
    }

    Matrix h = student.forward(zb);
    Matrix dh(cfg.batch_size, cfg.student_width);
    std::vector<Matrix> dheads(nteach);

    double total = 0.0;
    for (std::size_t t = 0; t < nteach; ++t) {
      Matrix pred = kernels::matmul_nt(h, student.heads[t]);
      Matrix dpred;
      step_losses[t] = loss_and_grad(cfg.loss, pred, tb[t], &dpred);
      total += step_losses[t];

      double w = weights[t];
      if (cfg.use_adaloss && !ada_weights.empty()) w *= ada_weights[t];

      dheads[t] = kernels::matmul_tn(dpred, h);
      for (double& v : dheads[t].data) v *= w;
      Matrix dh_t = kernels::matmul(dpred, student.heads[t]);
      for (std::size_t i = 0; i < dh.data.size(); ++i)
        dh.data[i] += w * dh_t.data[i];
    }
    if (!std::isfinite(total))
      throw TrainingDiverged(step, "distill: non-finite loss at step " +
                                       std::to_string(step));

    if (cfg.use_adaloss) {
      AdaLossResult r = adaloss_update(std::move(ada), step_losses);
      ada = std::move(r.state);
      ada_weights = std::move(r.weights);
    }

    if (step % cfg.record_every == 0) {
      StepRecord rec;
      rec.step = step;
      rec.train_loss = step_losses;
      eval_metrics(rec.normalized_mse, rec.denormalized_mse, nullptr);
      report.trajectory.push_back(std::move(rec));
    }

    Matrix da1, da2;
    student.backward(zb, dh, da1, da2);
    const double lr = cfg.learning_rate;
    for (std::size_t i = 0; i < student.a1.data.size(); ++i)
      student.a1.data[i] -= lr * da1.data[i];
    if (cfg.student_depth == 1)
      for (std::size_t i = 0; i < student.a2.data.size(); ++i)
        student.a2.data[i] -= lr * da2.data[i];
    for (std::size_t t = 0; t < nteach; ++t)
      for (std::size_t i = 0; i < student.heads[t].data.size(); ++i)
        student.heads[t].data[i] -= lr * dheads[t].data[i];
  }

  // Final record and per-teacher reports.
  std::vector<Matrix> final_errs(nteach);
  {
    StepRecord rec;
    rec.step = cfg.steps;
    rec.train_loss = step_losses;
    eval_metrics(rec.normalized_mse, rec.denormalized_mse, &final_errs);
    report.trajectory.push_back(std::move(rec));
  }
  const StepRecord& last = report.trajectory.back();

  Matrix h_eval = student.forward(eval.latent);
  report.teachers.resize(nteach);
  for (std::size_t t = 0; t < nteach; ++t) {
    TeacherReport& tr = report.teachers[t];
    tr.method = nrms[t] ? normalize::method_name(nrms[t]->method) : "baseline";
    tr.final_normalized_mse = last.normalized_mse[t];
    tr.final_denormalized_mse = last.denormalized_mse[t];

    if (nrms[t]) {
      analysis::VarianceRangeReport vr =
          analysis::variance_range(*nrms[t], final_errs[t]);
      tr.normalized_err_variance = std::move(vr.normalized_variance);
      tr.denormalized_err_variance = std::move(vr.denormalized_variance);
      tr.normalized_range = vr.normalized_range;
      tr.denormalized_range = vr.denormalized_range;
    } else {
      tr.normalized_err_variance = channel_variance_of(final_errs[t]);
      tr.denormalized_err_variance = tr.normalized_err_variance;
      const auto [lo, hi] = std::minmax_element(tr.normalized_err_variance.begin(),
                                                tr.normalized_err_variance.end());
      tr.normalized_range = *hi - *lo;
      tr.denormalized_range = tr.normalized_range;
    }

    Matrix pred = kernels::matmul_nt(h_eval, student.heads[t]);
    Vector per_sample = loss_per_sample(cfg.loss, pred, eval_targets[t]);
    const auto [lo, hi] = std::minmax_element(per_sample.begin(), per_sample.end());
    double vmin = *lo, vmax = *hi;
    if (vmax <= vmin) vmax = vmin + 1.0;
    const std::size_t bins = cfg.histogram_bins;
    tr.histogram_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
      tr.histogram_edges[b] = vmin + (vmax - vmin) * double(b) / double(bins);
    tr.histogram_counts.assign(bins, 0);
    for (double v : per_sample) {
      std::size_t b = std::size_t((v - vmin) / (vmax - vmin) * double(bins));
      if (b >= bins) b = bins - 1;
      ++tr.histogram_counts[b];
    }
  }
  if (cfg.use_adaloss) report.adaloss_weights = ada_weights;
  return report;
}

nlohmann::json DistillReport::to_json() const {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["teachers"] = nlohmann::json::array();
  for (const TeacherReport& tr : teachers) {
    nlohmann::json jt;
    jt["method"] = tr.method;
    jt["final_normalized_mse"] = tr.final_normalized_mse;
    jt["final_denormalized_mse"] = tr.final_denormalized_mse;
    jt["normalized_err_variance"] = tr.normalized_err_variance;
    jt["denormalized_err_variance"] = tr.denormalized_err_variance;
    jt["normalized_range"] = tr.normalized_range;
    jt["denormalized_range"] = tr.denormalized_range;
    jt["histogram"] = {{"edges", tr.histogram_edges},
                       {"counts", tr.histogram_counts}};
    doc["teachers"].push_back(std::move(jt));
  }
  doc["trajectory"] = nlohmann::json::array();
  for (const StepRecord& rec : trajectory) {
    doc["trajectory"].push_back({{"step", rec.step},
                                 {"train_loss", rec.train_loss},
                                 {"normalized_mse", rec.normalized_mse},
                                 {"denormalized_mse", rec.denormalized_mse}});
  }
  if (!adaloss_weights.empty()) doc["adaloss_weights"] = adaloss_weights;
  return doc;
}

namespace {

LossConfig::Kind loss_kind_from_name(const std::string& s) {
  if (s == "mse") return LossConfig::Kind::MSE;
  if (s == "cosine") return LossConfig::Kind::Cosine;
  if (s == "hybrid_mse") return LossConfig::Kind::HybridMSE;
  if (s == "hybrid_smooth_l1") return LossConfig::Kind::HybridSmoothL1;
  throw Error(ErrorCode::Usage, "unknown loss kind: " + s);
}

Vector vector_field(const nlohmann::json& obj, const char* key, std::size_t c,
                    double fallback) {
  Vector v(c, fallback);
  if (!obj.contains(key)) return v;
  const nlohmann::json& f = obj.at(key);
  if (f.is_number()) {
    std::fill(v.begin(), v.end(), f.get<double>());
  } else if (f.is_array()) {
    if (f.size() != c)
      throw ShapeError(std::string("config: ") + key + " length mismatch");
    for (std::size_t i = 0; i < c; ++i) v[i] = f[i].get<double>();
  } else {
    throw Error(ErrorCode::Usage,
                std::string("config: ") + key + " must be number or array");
  }
  return v;
}

}  // namespace

DistillConfig config_from_json(const nlohmann::json& doc) {
  DistillConfig cfg;
  try {
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.steps = doc.value("steps", cfg.steps);
    cfg.batch_size = doc.value("batch_size", cfg.batch_size);
    cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
    cfg.dataset_size = doc.value("dataset_size", cfg.dataset_size);
    cfg.eval_size = doc.value("eval_size", cfg.eval_size);
    cfg.student_width = doc.value("student_width", cfg.student_width);
    cfg.student_depth = doc.value("student_depth", cfg.student_depth);
    cfg.record_every = doc.value("record_every", cfg.record_every);
    cfg.histogram_bins = doc.value("histogram_bins", cfg.histogram_bins);
    cfg.use_adaloss = doc.value("use_adaloss", false);
    cfg.adaloss_decay = doc.value("adaloss_decay", cfg.adaloss_decay);
    cfg.adaloss_eps = doc.value("adaloss_eps", cfg.adaloss_eps);

    if (doc.contains("loss")) {
      const nlohmann::json& jl = doc.at("loss");
      cfg.loss.kind = loss_kind_from_name(jl.value("kind", std::string("mse")));
      cfg.loss.beta = jl.value("beta", cfg.loss.beta);
      cfg.loss.smooth_l1_delta = jl.value("smooth_l1_delta", cfg.loss.smooth_l1_delta);
    }

    if (!doc.contains("teachers") || !doc.at("teachers").is_array() ||
        doc.at("teachers").empty())
      throw Error(ErrorCode::Usage, "config: non-empty teachers array required");

    CounterRng spread_rng = CounterRng(cfg.seed).fork(0x5EED);
    std::size_t tindex = 0;
    for (const nlohmann::json& jt : doc.at("teachers")) {
      TeacherSpec spec;
      spec.latent_dim = jt.value("latent_dim", spec.latent_dim);
      spec.channels = jt.value("channels", spec.channels);
      spec.global_scale = jt.value("global_scale", spec.global_scale);
      spec.noise_structured_frac =
          jt.value("noise_structured_frac", spec.noise_structured_frac);
      spec.noise_uniform_abs = jt.value("noise_uniform_abs", spec.noise_uniform_abs);

      spec.channel_mean = vector_field(jt, "channel_mean", spec.channels, 0.0);
      spec.channel_scale = vector_field(jt, "channel_scale", spec.channels, 1.0);

      CounterRng trng = spread_rng.fork(tindex++);
      if (jt.contains("channel_mean_spread")) {
        const double m = jt.at("channel_mean_spread").get<double>();
        for (double& v : spec.channel_mean) v += m * (2.0 * trng.uniform() - 1.0);
      }
      if (jt.contains("channel_scale_spread")) {
        const double s = jt.at("channel_scale_spread").get<double>();
        if (!(s >= 1.0))
          throw Error(ErrorCode::Usage, "config: channel_scale_spread must be >= 1");
        const double lg = std::log(s);
        for (double& v : spec.channel_scale)
          v *= std::exp(lg * (2.0 * trng.uniform() - 1.0));
      }
      cfg.teachers.push_back(std::move(spec));
    }

    auto parse_method = [](const std::string& s) -> std::optional<Method> {
      if (s == "baseline" || s == "none") return std::nullopt;
      return normalize::method_from_name(s);
    };
    if (doc.contains("methods")) {
      for (const nlohmann::json& jm : doc.at("methods"))
        cfg.methods.push_back(parse_method(jm.get<std::string>()));
    } else if (doc.contains("method")) {
      const auto m = parse_method(doc.at("method").get<std::string>());
      cfg.methods.assign(cfg.teachers.size(), m);
    }

    if (doc.contains("teacher_weights")) {
      for (const nlohmann::json& jw : doc.at("teacher_weights"))
        cfg.teacher_weights.push_back(jw.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Usage, std::string("config: ") + e.what());
  }
  return cfg;
}

}  // namespace isonorm::distill
