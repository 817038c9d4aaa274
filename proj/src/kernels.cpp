#include "isonorm/kernels.hpp"

#include <algorithm>
#include <cstddef>

#include "isonorm/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isonorm::kernels {

namespace {

constexpr std::size_t kRowBlock = 64;   // output-row blocking for GEMMs
constexpr std::size_t kColBlock = 64;   // inner/column blocking
constexpr std::size_t kGramBlock = 256; // sample block for centered_gram
constexpr std::size_t kGramTile = 32;   // channel tile for centered_gram

void check_mul(std::size_t ak, std::size_t bk, const char* what) {
  if (ak != bk) throw ShapeError(std::string(what) + ": inner dimensions disagree");
}

// Tile of a·bᵀ for output rows [r0,r1) and columns [c0,c1).
// Dot products accumulate over k in ascending order.
inline void nt_tile(const Matrix& a, const Matrix& b, Matrix& out,
                    std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  const std::size_t kk = a.cols;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* ai = a[i];
    double* oi = out[i];
    for (std::size_t j = c0; j < c1; ++j) {
      const double* bj = b[j];
      double acc = 0.0;
      for (std::size_t k = 0; k < kk; ++k) acc += ai[k] * bj[k];
      oi[j] = acc;
    }
  }
}

}  // namespace

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul(a.cols, b.rows, "matmul");
  const std::size_t m = a.rows, kk = a.cols, n = b.cols;
  Matrix out(m, n);
  const std::size_t nblocks = (m + kRowBlock - 1) / kRowBlock;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t bi = 0; bi < nblocks; ++bi) {
    const std::size_t i0 = bi * kRowBlock, i1 = std::min(m, i0 + kRowBlock);
    for (std::size_t k0 = 0; k0 < kk; k0 += kColBlock) {
      const std::size_t k1 = std::min(kk, k0 + kColBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* ai = a[i];
        double* oi = out[i];
        for (std::size_t k = k0; k < k1; ++k) {
          const double aik = ai[k];
          const double* bk = b[k];
          for (std::size_t j = 0; j < n; ++j) oi[j] += aik * bk[j];
        }
      }
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_mul(a.cols, b.cols, "matmul_nt");
  const std::size_t m = a.rows, n = b.rows;
  Matrix out(m, n);
  const std::size_t nblocks = (m + kRowBlock - 1) / kRowBlock;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t bi = 0; bi < nblocks; ++bi) {
    const std::size_t i0 = bi * kRowBlock, i1 = std::min(m, i0 + kRowBlock);
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock)
      nt_tile(a, b, out, i0, i1, j0, std::min(n, j0 + kColBlock));
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_mul(a.rows, b.rows, "matmul_tn");
  const std::size_t m = a.cols, kk = a.rows, n = b.cols;
  Matrix out(m, n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out[i];
    for (std::size_t k = 0; k < kk; ++k) {
      const double aki = a(k, i);
      const double* bk = b[k];
      for (std::size_t j = 0; j < n; ++j) oi[j] += aki * bk[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows * b.rows, a.cols * b.cols);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t ia = 0; ia < a.rows; ++ia)
    for (std::size_t ib = 0; ib < b.rows; ++ib) {
      double* orow = out[ia * b.rows + ib];
      const double* brow = b[ib];
      for (std::size_t ja = 0; ja < a.cols; ++ja) {
        const double aij = a(ia, ja);
        double* dst = orow + ja * b.cols;
        for (std::size_t jb = 0; jb < b.cols; ++jb) dst[jb] = aij * brow[jb];
      }
    }
  return out;
}

Matrix centered_gram(const Matrix& x, const Vector& mean) {
  if (mean.size() != x.cols) throw ShapeError("centered_gram: mean length != cols");
  const std::size_t n = x.rows, c = x.cols;
  Matrix out(c, c);
  Matrix buf(std::min(n, kGramBlock), c);
  const std::size_t ntiles = (c + kGramTile - 1) / kGramTile;
  // Sample blocks run serially in order; within a block each upper-triangle
  // channel tile is owned by one thread, so every out(c1,c2) accumulates its
  // terms in ascending sample order no matter how many threads run.
  for (std::size_t n0 = 0; n0 < n; n0 += kGramBlock) {
    const std::size_t bn = std::min(kGramBlock, n - n0);
#ifdef _OPENMP
#pragma omp parallel
#endif
    {
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
      for (std::size_t i = 0; i < bn; ++i) {
        const double* xi = x[n0 + i];
        double* bi = buf[i];
        for (std::size_t j = 0; j < c; ++j) bi[j] = xi[j] - mean[j];
      }
#ifdef _OPENMP
#pragma omp for schedule(static) collapse(2)
#endif
      for (std::size_t t1 = 0; t1 < ntiles; ++t1)
        for (std::size_t t2 = 0; t2 < ntiles; ++t2) {
          if (t2 < t1) continue;
          const std::size_t c1a = t1 * kGramTile, c1b = std::min(c, c1a + kGramTile);
          const std::size_t c2a = t2 * kGramTile, c2b = std::min(c, c2a + kGramTile);
          for (std::size_t i = 0; i < bn; ++i) {
            const double* bi = buf[i];
            for (std::size_t c1 = c1a; c1 < c1b; ++c1) {
              const double v = bi[c1];
              double* orow = out[c1];
              const std::size_t lo = std::max(c1, c2a);
              for (std::size_t c2 = lo; c2 < c2b; ++c2) orow[c2] += v * bi[c2];
            }
          }
        }
    }
  }
  for (std::size_t c1 = 0; c1 < c; ++c1)
    for (std::size_t c2 = c1 + 1; c2 < c; ++c2) out(c2, c1) = out(c1, c2);
  return out;
}

Matrix affine_pre(const Matrix& x, const Vector& shift, const Matrix& w) {
  if (shift.size() != x.cols) throw ShapeError("affine_pre: shift length != cols");
  check_mul(x.cols, w.cols, "affine_pre");
  const std::size_t n = x.rows, c = x.cols, p = w.rows;
  Matrix out(n, p);
  const std::size_t nblocks = (n + kRowBlock - 1) / kRowBlock;
#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    Matrix buf(kRowBlock, c);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (std::size_t bi = 0; bi < nblocks; ++bi) {
      const std::size_t i0 = bi * kRowBlock, i1 = std::min(n, i0 + kRowBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* xi = x[i];
        double* bi_row = buf[i - i0];
        for (std::size_t j = 0; j < c; ++j) bi_row[j] = xi[j] - shift[j];
      }
      for (std::size_t j0 = 0; j0 < p; j0 += kColBlock) {
        const std::size_t j1 = std::min(p, j0 + kColBlock);
        for (std::size_t i = i0; i < i1; ++i) {
          const double* bi_row = buf[i - i0];
          double* oi = out[i];
          for (std::size_t j = j0; j < j1; ++j) {
            const double* wj = w[j];
            double acc = 0.0;
            for (std::size_t k = 0; k < c; ++k) acc += wj[k] * bi_row[k];
            oi[j] = acc;
          }
        }
      }
    }
  }
  return out;
}

Matrix affine_post(const Matrix& x, const Matrix& w, const Vector& shift) {
  if (shift.size() != w.rows) throw ShapeError("affine_post: shift length != w rows");
  check_mul(x.cols, w.cols, "affine_post");
  const std::size_t n = x.rows, c = x.cols, p = w.rows;
  Matrix out(n, p);
  const std::size_t nblocks = (n + kRowBlock - 1) / kRowBlock;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t bi = 0; bi < nblocks; ++bi) {
    const std::size_t i0 = bi * kRowBlock, i1 = std::min(n, i0 + kRowBlock);
    for (std::size_t j0 = 0; j0 < p; j0 += kColBlock) {
      const std::size_t j1 = std::min(p, j0 + kColBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* xi = x[i];
        double* oi = out[i];
        for (std::size_t j = j0; j < j1; ++j) {
          const double* wj = w[j];
          double acc = 0.0;
          for (std::size_t k = 0; k < c; ++k) acc += wj[k] * xi[k];
          oi[j] = acc + shift[j];
        }
      }
    }
  }
  return out;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul(a.cols, b.rows, "matmul");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_mul(a.cols, b.cols, "matmul_nt");
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_mul(a.rows, b.rows, "matmul_tn");
  Matrix out(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i)
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t ia = 0; ia < a.rows; ++ia)
    for (std::size_t ib = 0; ib < b.rows; ++ib)
      for (std::size_t ja = 0; ja < a.cols; ++ja)
        for (std::size_t jb = 0; jb < b.cols; ++jb)
          out(ia * b.rows + ib, ja * b.cols + jb) = a(ia, ja) * b(ib, jb);
  return out;
}

Matrix centered_gram(const Matrix& x, const Vector& mean) {
  if (mean.size() != x.cols) throw ShapeError("centered_gram: mean length != cols");
  const std::size_t c = x.cols;
  Matrix out(c, c);
  for (std::size_t c1 = 0; c1 < c; ++c1)
    for (std::size_t c2 = c1; c2 < c; ++c2) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i)
        acc += (x(i, c1) - mean[c1]) * (x(i, c2) - mean[c2]);
      out(c1, c2) = acc;
      out(c2, c1) = acc;
    }
  return out;
}

Matrix affine_pre(const Matrix& x, const Vector& shift, const Matrix& w) {
  if (shift.size() != x.cols) throw ShapeError("affine_pre: shift length != cols");
  check_mul(x.cols, w.cols, "affine_pre");
  Matrix out(x.rows, w.rows);
  Vector buf(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) buf[k] = x(i, k) - shift[k];
    for (std::size_t j = 0; j < w.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += w(j, k) * buf[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix affine_post(const Matrix& x, const Matrix& w, const Vector& shift) {
  if (shift.size() != w.rows) throw ShapeError("affine_post: shift length != w rows");
  check_mul(x.cols, w.cols, "affine_post");
  Matrix out(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < w.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += w(j, k) * x(i, k);
      out(i, j) = acc + shift[j];
    }
  return out;
}

}  // namespace serial

}  // namespace isonorm::kernels
