#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace isonorm {

using Vector = std::vector<double>;

// Dense row-major matrix. Deliberately minimal: the kernels in kernels.hpp do
// the heavy lifting, this is just storage with bounds-free indexing.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* operator[](std::size_t r) { return data.data() + r * cols; }
  const double* operator[](std::size_t r) const { return data.data() + r * cols; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool empty() const { return data.empty(); }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double x : m.data) v = std::max(v, std::abs(x));
  return v;
}

inline double max_abs(const Vector& v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    v = std::max(v, std::abs(a.data[i] - b.data[i]));
  return v;
}

inline bool all_finite(const Matrix& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace isonorm
