#pragma once

#include <cmath>
#include <cstddef>

#include "isonorm/matrix.hpp"
#include "isonorm/rng.hpp"

namespace isonorm::testing {

// Oracle matmul, deliberately independent of kernels.cpp.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

inline Matrix naive_transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

// Modified Gram-Schmidt on a random normal matrix.
inline Matrix random_orthogonal(std::size_t n, CounterRng& rng) {
  Matrix q = normal_matrix(rng, n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
      for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

// Σ = R·diag(spectrum)·Rᵀ for a random orthogonal R.
inline Matrix covariance_from_spectrum(const Vector& spectrum, CounterRng& rng) {
  const std::size_t c = spectrum.size();
  Matrix r = random_orthogonal(c, rng);
  Matrix out(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += r(i, k) * spectrum[k] * r(j, k);
      out(i, j) = acc;
    }
  return out;
}

// Exact-covariance-free sampler: rows y = R·diag(sqrt(spectrum))·z + mean.
inline Matrix gaussian_rows(std::size_t n, const Vector& spectrum,
                            const Vector& mean, const Matrix& r, CounterRng& rng) {
  const std::size_t c = spectrum.size();
  Matrix out(n, c);
  Vector z(c), scaled(c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) z[k] = rng.normal() * std::sqrt(spectrum[k]);
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += r(j, k) * z[k];
      out(i, j) = acc + (mean.empty() ? 0.0 : mean[j]);
    }
  }
  return out;
}

// Data whose sample covariance (N−1 denominator) is exactly diag(spectrum):
// for each channel c, two rows ±sqrt((N−1)/2 · λ_c)·e_c.
inline Matrix exact_diag_cov_data(const Vector& spectrum) {
  const std::size_t c = spectrum.size();
  const std::size_t n = 2 * c;
  Matrix data(n, c);
  for (std::size_t j = 0; j < c; ++j) {
    const double a = std::sqrt(double(n - 1) / 2.0 * spectrum[j]);
    data(2 * j, j) = a;
    data(2 * j + 1, j) = -a;
  }
  return data;
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace isonorm::testing
