#pragma once

#include <cstddef>

#include "isonorm/matrix.hpp"

namespace isonorm::moments {

// Streaming moment estimates: per-channel mean + centered comoment (C×C) for
// the covariance, plus scalar mean/M2 over the flattened N·C value stream for
// the global statistics. update/merge are pure (value in, value out) and use
// Chan-style combination, so parallel reductions agree with single-pass runs.
struct MomentAccumulator {
  std::size_t channels = 0;
  std::size_t count = 0;       // samples (rows) seen
  Vector channel_mean;         // C
  Matrix comoment;             // C×C, Σ (y−μ)(y−μ)ᵀ
  double global_mean = 0.0;    // over all N·C values
  double global_m2 = 0.0;      // Σ (y−μ_g)² over all N·C values

  MomentAccumulator() = default;
  explicit MomentAccumulator(std::size_t c)
      : channels(c), channel_mean(c, 0.0), comoment(c, c) {}
};

struct CovarianceEstimate {
  Vector mean;      // C
  Matrix cov;       // C×C, denominator N−1
  std::size_t n_samples = 0;
};

// Symmetric eigendecomposition Σ = UΛUᵀ.
struct Eigensystem {
  Matrix vectors;   // C×C orthogonal U; columns are eigenvectors
  Vector values;    // λ sorted descending, clamped at 0
};

struct FinalizedMoments {
  CovarianceEstimate covariance;
  Vector per_channel_sigma;   // sqrt(diag cov), denominator N−1
  double global_mu = 0.0;
  double global_sigma = 0.0;  // denominator N·C−1
};

MomentAccumulator update(MomentAccumulator acc, const Matrix& batch);
MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b);
FinalizedMoments finalize(const MomentAccumulator& acc);

// Cyclic Jacobi with a deterministic eigenvector sign convention (largest-
// magnitude entry positive). Stops when every off-diagonal is ≤ 1e-12·trace;
// 64-sweep cap.
Eigensystem eigh(const CovarianceEstimate& cov);
Eigensystem eigh(const Matrix& sym);

// Convenience: one-shot moments of a full matrix.
FinalizedMoments compute_moments(const Matrix& data);

}  // namespace isonorm::moments
