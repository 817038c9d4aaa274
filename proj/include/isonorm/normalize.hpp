#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isonorm/matrix.hpp"
#include "isonorm/moments.hpp"

namespace isonorm::normalize {

enum class Method {
  GlobalStandardize,
  Standardize,
  PcaWhiten,
  ZcaWhiten,
  HcaWhiten,
  PhiS,
};

const char* method_name(Method m);       // gstd | std | pca | zca | hca | phis
Method method_from_name(const std::string& name);

enum class TransformKind { Scalar, Diagonal, Dense };

enum class QChoice { PCA, ZCA, HCA };

struct FitOptions {
  // Relative floor: σ_c vs. max σ for Standardize, λ vs. λ_max for whitening.
  double floor_rel = 1e-6;
  // Clamp at the floor instead of raising DegenerateChannel/RankDeficient.
  bool clamp = false;
  // Sign-fix H and U rows for PHI-S so repeated fits are sign-consistent.
  bool sign_fix = true;
};

// A fitted invertible transform x = forward·(y − offset); y = inverse·x + offset.
// The forward/inverse pair is scalar, per-channel diagonal, or dense depending
// on the method. Whitening/PHI-S keep the eigensystem they were built from so
// diagnostics can reuse it.
struct Normalizer {
  Method method = Method::GlobalStandardize;
  std::size_t channels = 0;
  Vector offset;  // μ, or 1·μ_g for GlobalStandardize

  TransformKind kind = TransformKind::Scalar;
  double forward_scale = 1.0, inverse_scale = 1.0;
  Vector forward_diag, inverse_diag;
  Matrix forward_mat, inverse_mat;

  double phi = 0.0;      // sqrt((1/C)·Σλ); set whenever an eigensystem exists
  double alpha = 0.0;    // scalar gain: 1/σ_g (GlobalStandardize), 1/φ (PHI-S)
  double mu_g = 0.0, sigma_g = 0.0;  // GlobalStandardize only
  std::size_t fit_samples = 0;

  std::optional<moments::Eigensystem> eigs;
};

Normalizer fit_global_standardize(const moments::FinalizedMoments& stats);
Normalizer fit_standardize(const moments::FinalizedMoments& stats,
                           const FitOptions& opt = {});
Normalizer fit_whiten(const moments::FinalizedMoments& stats, QChoice q,
                      const FitOptions& opt = {});
Normalizer fit_whiten(const moments::FinalizedMoments& stats, QChoice q,
                      const moments::Eigensystem& eigs, const FitOptions& opt = {});
Normalizer fit_phi_s(const moments::FinalizedMoments& stats,
                     const FitOptions& opt = {});
Normalizer fit_phi_s(const moments::FinalizedMoments& stats,
                     const moments::Eigensystem& eigs, const FitOptions& opt = {});

// Fit by method tag; dispatches to the functions above.
Normalizer fit(Method m, const moments::FinalizedMoments& stats,
               const FitOptions& opt = {});

Matrix apply(const Normalizer& nrm, const Matrix& y);
Matrix invert(const Normalizer& nrm, const Matrix& x);

// Bulk single-precision apply; ~1e-3 relative agreement with the f64 path.
std::vector<float> apply_f32(const Normalizer& nrm, const std::vector<float>& y,
                             std::size_t rows);

std::vector<std::uint8_t> serialize(const Normalizer& nrm);
Normalizer deserialize(const std::uint8_t* data, std::size_t n);
Normalizer deserialize(const std::vector<std::uint8_t>& bytes);

}  // namespace isonorm::normalize
