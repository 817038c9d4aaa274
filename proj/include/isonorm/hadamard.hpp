#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "isonorm/matrix.hpp"

namespace isonorm::hadamard {

// Hard cap on matrix order; everything this library needs is ≤ 2048.
constexpr std::size_t kMaxSize = 4096;

// Construction tree. Immutable; Kron nodes share children by pointer.
struct Recipe {
  enum class Kind { Sylvester, Paley1, Paley2, Kron };
  Kind kind = Kind::Sylvester;
  std::uint64_t param = 0;  // Sylvester: exponent n; Paley1/2: prime q
  std::shared_ptr<const Recipe> left, right;

  std::string to_sexpr() const;

  static Recipe make_sylvester(std::uint64_t n);
  static Recipe make_paley1(std::uint64_t q);
  static Recipe make_paley2(std::uint64_t q);
  static Recipe make_kron(Recipe a, Recipe b);
};

struct HadamardMatrix {
  Matrix entries;  // C×C, every entry ±1/√C
  Recipe recipe;
  std::size_t size() const { return entries.rows; }
};

struct ValidationReport {
  double max_orthogonality_residual;  // ‖HHᵀ − I‖∞
  double entry_magnitude_error;       // max | |H_ij| − 1/√C |
};

// Sylvester doubling: H(2^n), 1/√2 scaling per level.
HadamardMatrix sylvester(std::uint64_t n);
// Paley I: size q+1 for prime q ≡ 3 (mod 4).
HadamardMatrix paley1(std::uint64_t q);
// Paley II: size 2(q+1) for prime q ≡ 1 (mod 4).
HadamardMatrix paley2(std::uint64_t q);
// Kronecker product; normalization is automatic.
HadamardMatrix kron(const HadamardMatrix& a, const HadamardMatrix& b);
// Plan search: powers of two via Sylvester, Sylvester⊗Paley for the rest;
// well-known transformer widths are pinned to fixed recipes.
HadamardMatrix construct(std::size_t c);
// Rebuild a matrix from its recipe (bit-for-bit reproducible).
HadamardMatrix replay(const Recipe& r);

ValidationReport validate(const HadamardMatrix& h);

}  // namespace isonorm::hadamard
