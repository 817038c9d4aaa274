#pragma once

#include "isonorm/matrix.hpp"

// Dense kernels used throughout the library. Each kernel exists twice:
// isonorm::kernels::* is the production version (OpenMP over output rows or
// tiles, cache-blocked where it matters) and isonorm::kernels::serial::* is a
// plain reference implementation. Both accumulate every output element in the
// same fixed index order, so results are bitwise identical — the test suite
// relies on that, and it is what makes parallel runs reproducible.
namespace isonorm::kernels {

bool openmp_enabled();
int thread_count();

// a (m×k) · b (k×n) -> (m×n)
Matrix matmul(const Matrix& a, const Matrix& b);
// a (m×k) · bᵀ, b given as (n×k) -> (m×n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// aᵀ · b, a given as (k×m), b (k×n) -> (m×n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Kronecker product, (ma·mb)×(na·nb)
Matrix kron(const Matrix& a, const Matrix& b);

// (X − 1μᵀ)ᵀ(X − 1μᵀ) for X (n×c) -> (c×c); the covariance comoment.
Matrix centered_gram(const Matrix& x, const Vector& mean);

// Row-wise affine maps used by apply/invert:
//   out_i = w · (x_i − shift)   with w (p×c), x (n×c) -> (n×p)
Matrix affine_pre(const Matrix& x, const Vector& shift, const Matrix& w);
//   out_i = w · x_i + shift     with w (p×c), x (n×c) -> (n×p)
Matrix affine_post(const Matrix& x, const Matrix& w, const Vector& shift);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix kron(const Matrix& a, const Matrix& b);
Matrix centered_gram(const Matrix& x, const Vector& mean);
Matrix affine_pre(const Matrix& x, const Vector& shift, const Matrix& w);
Matrix affine_post(const Matrix& x, const Matrix& w, const Vector& shift);
}  // namespace serial

}  // namespace isonorm::kernels
