#pragma once

#include <cstddef>
#include <optional>

#include "isonorm/hadamard.hpp"
#include "isonorm/matrix.hpp"
#include "isonorm/moments.hpp"
#include "isonorm/normalize.hpp"

namespace isonorm::analysis {

// The linear map sending normalized-space student error back to the original
// teacher space; always equals the normalizer's inverse linear part.
struct ErrorProfile {
  normalize::Method method;
  normalize::TransformKind kind;
  double scale = 1.0;   // Scalar kind
  Vector diag;          // Diagonal kind
  Matrix dense;         // Dense kind
  std::optional<moments::Eigensystem> eigen_context;
};

struct RadialCurve {
  Vector thetas;  // [0, 2π), uniform grid
  Vector radii;   // ‖back_map · (cosθ, sinθ)ᵀ‖
};

struct VarianceRangeReport {
  Vector normalized_variance;    // per channel
  Vector denormalized_variance;  // per channel, after the back map
  double normalized_range = 0.0;
  double denormalized_range = 0.0;
};

struct AlignmentReport {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count_above = 0;  // matched diagonal entries > threshold
  double threshold = 0.75;
};

ErrorProfile error_back_map(const normalize::Normalizer& nrm);

// 2-D error-circle radius as a function of angle, for any method, derived
// from the eigensystem alone (distribution assumed mean-centered).
RadialCurve radial_error(const moments::Eigensystem& eigs, normalize::Method method,
                         std::size_t grid = 720);

VarianceRangeReport variance_range(const normalize::Normalizer& nrm,
                                   const Matrix& student_err);

// exp of the Shannon entropy of the normalized spectrum; zeros dropped.
double effective_rank(const Vector& values);

// Optimal assignment between Hadamard rows and eigenbasis directions;
// statistics of diag(abs(H·Uᵀ)) after matching.
AlignmentReport alignment_report(const moments::Eigensystem& eigs,
                                 const hadamard::HadamardMatrix& h);

// Exact solver for the square linear assignment problem (minimizes cost);
// exposed for reuse and testing. Returns row→column assignment.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

}  // namespace isonorm::analysis
