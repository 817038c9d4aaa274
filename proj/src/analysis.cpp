#include "isonorm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "isonorm/errors.hpp"
#include "isonorm/kernels.hpp"

namespace isonorm::analysis {

using normalize::Method;
using normalize::Normalizer;
using normalize::TransformKind;

ErrorProfile error_back_map(const Normalizer& nrm) {
  ErrorProfile p;
  p.method = nrm.method;
  p.kind = nrm.kind;
  switch (nrm.kind) {
    case TransformKind::Scalar:
      p.scale = nrm.inverse_scale;
      break;
    case TransformKind::Diagonal:
      p.diag = nrm.inverse_diag;
      break;
    case TransformKind::Dense:
      p.dense = nrm.inverse_mat;
      break;
  }
  p.eigen_context = nrm.eigs;
  return p;
}

RadialCurve radial_error(const moments::Eigensystem& eigs, Method method,
                         std::size_t grid) {
  if (eigs.values.size() != 2 || eigs.vectors.rows != 2)
    throw ShapeError("radial_error: needs a 2-D eigensystem");
  if (grid == 0) throw ShapeError("radial_error: empty grid");
  const double l1 = eigs.values[0], l2 = eigs.values[1];
  const double phi = std::sqrt(0.5 * (l1 + l2));

  // 2×2 back map for the requested method, built from the eigensystem.
  // Isotropic methods reduce to the scalar φ (σ_g = φ for centered data).
  Matrix b(2, 2);
  bool scalar = false;
  switch (method) {
    case Method::GlobalStandardize:
    case Method::PhiS:
      scalar = true;
      break;
    case Method::PcaWhiten:
      for (std::size_t i = 0; i < 2; ++i) {
        b(i, 0) = eigs.vectors(i, 0) * std::sqrt(l1);
        b(i, 1) = eigs.vectors(i, 1) * std::sqrt(l2);
      }
      break;
    case Method::ZcaWhiten: {
      Matrix ul(2, 2);
      for (std::size_t i = 0; i < 2; ++i) {
        ul(i, 0) = eigs.vectors(i, 0) * std::sqrt(l1);
        ul(i, 1) = eigs.vectors(i, 1) * std::sqrt(l2);
      }
      b = kernels::matmul_nt(ul, eigs.vectors);
      break;
    }
    case Method::HcaWhiten: {
      Matrix ul(2, 2);
      for (std::size_t i = 0; i < 2; ++i) {
        ul(i, 0) = eigs.vectors(i, 0) * std::sqrt(l1);
        ul(i, 1) = eigs.vectors(i, 1) * std::sqrt(l2);
      }
      b = kernels::matmul_nt(ul, hadamard::sylvester(1).entries);
      break;
    }
    case Method::Standardize:
      // σ_c from the eigensystem: σ_c² = Σ_k U(c,k)² λ_k
      for (std::size_t i = 0; i < 2; ++i) {
        const double s =
            std::sqrt(eigs.vectors(i, 0) * eigs.vectors(i, 0) * l1 +
                      eigs.vectors(i, 1) * eigs.vectors(i, 1) * l2);
        b(i, i) = s;
      }
      break;
  }

  RadialCurve curve;
  curve.thetas.resize(grid);
  curve.radii.resize(grid);
  const double step = 2.0 * 3.14159265358979323846 / double(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double th = step * double(i);
    curve.thetas[i] = th;
    if (scalar) {
      curve.radii[i] = phi;
    } else {
      const double c = std::cos(th), s = std::sin(th);
      const double e0 = b(0, 0) * c + b(0, 1) * s;
      const double e1 = b(1, 0) * c + b(1, 1) * s;
      curve.radii[i] = std::sqrt(e0 * e0 + e1 * e1);
    }
  }
  return curve;
}

VarianceRangeReport variance_range(const Normalizer& nrm, const Matrix& err) {
  if (err.cols != nrm.channels)
    throw ShapeError("variance_range: error matrix channel count mismatch");
  if (err.rows < 2)
    throw InsufficientData("variance_range: need at least 2 error rows");
  const std::size_t n = err.rows, c = err.cols;

  auto channel_variance = [&](const Matrix& m) {
    Vector mean(c, 0.0), var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = m[i];
      for (std::size_t j = 0; j < c; ++j) mean[j] += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) mean[j] /= double(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = m[i];
      for (std::size_t j = 0; j < c; ++j) {
        const double d = row[j] - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) var[j] /= double(n - 1);
    return var;
  };

  VarianceRangeReport rep;
  rep.normalized_variance = channel_variance(err);

  Matrix denorm;
  switch (nrm.kind) {
    case TransformKind::Scalar: {
      denorm = err;
      for (double& v : denorm.data) v *= nrm.inverse_scale;
      break;
    }
    case TransformKind::Diagonal: {
      denorm = err;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = denorm[i];
        for (std::size_t j = 0; j < c; ++j) row[j] *= nrm.inverse_diag[j];
      }
      break;
    }
    case TransformKind::Dense:
      denorm = kernels::matmul_nt(err, nrm.inverse_mat);
      break;
  }
  rep.denormalized_variance = channel_variance(denorm);

  auto range = [](const Vector& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  rep.normalized_range = range(rep.normalized_variance);
  rep.denormalized_range = range(rep.denormalized_variance);
  return rep;
}

double effective_rank(const Vector& values) {
  double total = 0.0;
  for (double v : values)
    if (v > 0.0) total += v;
  if (total <= 0.0)
    throw DegenerateDistribution("effective_rank: spectrum has no positive values");
  double entropy = 0.0;
  for (double v : values) {
    if (v <= 0.0) continue;
    const double p = v / total;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  if (cost.rows != cost.cols || cost.rows == 0)
    throw ShapeError("solve_assignment: cost matrix must be square and nonempty");
  const std::size_t n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials-based augmenting path method, O(n³).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

AlignmentReport alignment_report(const moments::Eigensystem& eigs,
                                 const hadamard::HadamardMatrix& h) {
  const std::size_t n = h.size();
  if (eigs.vectors.rows != n || eigs.vectors.cols != n)
    throw ShapeError("alignment_report: eigensystem and Hadamard sizes disagree");
  // Score matrix: (HU)_ij = ⟨row i of H, eigenvector j⟩; both are unit
  // vectors, so entries are cosine similarities.
  Matrix a = kernels::matmul(h.entries, eigs.vectors);
  for (double& x : a.data) x = std::abs(x);
  // maximize the matched sum == minimize (max − a)
  const double top = max_abs(a);
  Matrix cost(n, n);
  for (std::size_t i = 0; i < n * n; ++i) cost.data[i] = top - a.data[i];
  const auto match = solve_assignment(cost);

  AlignmentReport rep;
  rep.min = std::numeric_limits<double>::infinity();
  rep.max = -rep.min;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = a(i, match[i]);
    sum += m;
    rep.min = std::min(rep.min, m);
    rep.max = std::max(rep.max, m);
    if (m > rep.threshold) ++rep.count_above;
  }
  rep.mean = sum / double(n);
  return rep;
}

}  // namespace isonorm::analysis
