#include "isonorm/hadamard.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "isonorm/errors.hpp"
#include "isonorm/kernels.hpp"

namespace isonorm::hadamard {

namespace {

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  for (std::uint64_t d = 3; d * d <= n; d += 2)
    if (n % d == 0) return false;
  return true;
}

// Legendre symbol table for prime q: chi[0]=0, chi[a]=±1.
std::vector<int> legendre_table(std::uint64_t q) {
  std::vector<int> chi(q, -1);
  chi[0] = 0;
  for (std::uint64_t k = 1; k < q; ++k) chi[(k * k) % q] = 1;
  return chi;
}

// Canonical sign form: first column, then first row, all positive.
// Row/column negations keep the Hadamard property.
void normalize_signs(Matrix& m) {
  const std::size_t n = m.rows;
  for (std::size_t i = 0; i < n; ++i)
    if (m(i, 0) < 0.0)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = -m(i, j);
  for (std::size_t j = 0; j < n; ++j)
    if (m(0, j) < 0.0)
      for (std::size_t i = 0; i < n; ++i) m(i, j) = -m(i, j);
}

void check_size(std::uint64_t size, const char* what) {
  if (size > kMaxSize)
    throw SizeLimitExceeded(std::string(what) + ": order " + std::to_string(size) +
                            " exceeds cap " + std::to_string(kMaxSize));
}

}  // namespace

std::string Recipe::to_sexpr() const {
  switch (kind) {
    case Kind::Sylvester: return "(sylvester " + std::to_string(param) + ")";
    case Kind::Paley1: return "(paley1 " + std::to_string(param) + ")";
    case Kind::Paley2: return "(paley2 " + std::to_string(param) + ")";
    case Kind::Kron:
      return "(kron " + left->to_sexpr() + " " + right->to_sexpr() + ")";
  }
  return "";
}

Recipe Recipe::make_sylvester(std::uint64_t n) { return Recipe{Kind::Sylvester, n, nullptr, nullptr}; }
Recipe Recipe::make_paley1(std::uint64_t q) { return Recipe{Kind::Paley1, q, nullptr, nullptr}; }
Recipe Recipe::make_paley2(std::uint64_t q) { return Recipe{Kind::Paley2, q, nullptr, nullptr}; }
Recipe Recipe::make_kron(Recipe a, Recipe b) {
  return Recipe{Kind::Kron, 0, std::make_shared<const Recipe>(std::move(a)),
                std::make_shared<const Recipe>(std::move(b))};
}

HadamardMatrix sylvester(std::uint64_t n) {
  if (n >= 64) throw SizeLimitExceeded("sylvester: exponent too large");
  check_size(std::uint64_t(1) << n, "sylvester");
  Matrix h(1, 1);
  h(0, 0) = 1.0;
  const double s = 1.0 / std::sqrt(2.0);
  for (std::uint64_t level = 0; level < n; ++level) {
    const std::size_t m = h.rows;
    Matrix next(2 * m, 2 * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double v = h(i, j) * s;
        next(i, j) = v;
        next(i, j + m) = v;
        next(i + m, j) = v;
        next(i + m, j + m) = -v;
      }
    h = std::move(next);
  }
  return HadamardMatrix{std::move(h), Recipe::make_sylvester(n)};
}

HadamardMatrix paley1(std::uint64_t q) {
  if (q % 4 != 3)
    throw InvalidResidueClass("paley1: q = " + std::to_string(q) + " is not ≡ 3 (mod 4)");
  check_size(q + 1, "paley1");
  if (!is_prime(q))
    throw NotPrimePower("paley1: q = " + std::to_string(q) +
                        " is not prime (prime-power fields not implemented)");
  const auto chi = legendre_table(q);
  const std::size_t n = q + 1;
  // H = I + S with S = [[0, 1ᵀ], [−1, Q]], Q the Jacobsthal matrix.
  Matrix h(n, n);
  h(0, 0) = 1.0;
  for (std::size_t j = 1; j < n; ++j) h(0, j) = 1.0;
  for (std::size_t i = 1; i < n; ++i) h(i, 0) = -1.0;
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b)
      h(a + 1, b + 1) = (a == b) ? 1.0 : double(chi[(b + q - a) % q]);
  normalize_signs(h);
  const double s = 1.0 / std::sqrt(double(n));
  for (double& v : h.data) v *= s;
  return HadamardMatrix{std::move(h), Recipe::make_paley1(q)};
}

HadamardMatrix paley2(std::uint64_t q) {
  if (q % 4 != 1)
    throw InvalidResidueClass("paley2: q = " + std::to_string(q) + " is not ≡ 1 (mod 4)");
  check_size(2 * (q + 1), "paley2");
  if (!is_prime(q))
    throw NotPrimePower("paley2: q = " + std::to_string(q) +
                        " is not prime (prime-power fields not implemented)");
  const auto chi = legendre_table(q);
  const std::size_t m = q + 1;
  // Symmetric conference core (χ(−1)=1 for q ≡ 1 mod 4).
  Matrix s(m, m);
  for (std::size_t j = 1; j < m; ++j) {
    s(0, j) = 1.0;
    s(j, 0) = 1.0;
  }
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b)
      s(a + 1, b + 1) = (a == b) ? 0.0 : double(chi[(b + q - a) % q]);
  // H = S ⊗ [[1,1],[1,−1]] + I ⊗ [[1,−1],[−1,−1]]
  const std::size_t n = 2 * m;
  Matrix h(n, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double sij = s(i, j);
      double b00, b01, b10, b11;
      if (i == j) {
        b00 = 1.0; b01 = -1.0; b10 = -1.0; b11 = -1.0;
      } else {
        b00 = sij; b01 = sij; b10 = sij; b11 = -sij;
      }
      h(2 * i, 2 * j) = b00;
      h(2 * i, 2 * j + 1) = b01;
      h(2 * i + 1, 2 * j) = b10;
      h(2 * i + 1, 2 * j + 1) = b11;
    }
  normalize_signs(h);
  const double sc = 1.0 / std::sqrt(double(n));
  for (double& v : h.data) v *= sc;
  return HadamardMatrix{std::move(h), Recipe::make_paley2(q)};
}

HadamardMatrix kron(const HadamardMatrix& a, const HadamardMatrix& b) {
  check_size(std::uint64_t(a.size()) * b.size(), "kron");
  return HadamardMatrix{kernels::kron(a.entries, b.entries),
                        Recipe::make_kron(a.recipe, b.recipe)};
}

namespace {

bool is_power_of_two(std::size_t c) { return c != 0 && (c & (c - 1)) == 0; }

std::uint64_t log2_exact(std::size_t c) {
  std::uint64_t n = 0;
  while ((std::size_t(1) << n) < c) ++n;
  return n;
}

HadamardMatrix with_sylvester_factor(std::uint64_t s, HadamardMatrix core) {
  if (s == 0) return core;
  return kron(sylvester(s), core);
}

}  // namespace

HadamardMatrix construct(std::size_t c) {
  if (c == 0) throw ShapeError("construct: size must be ≥ 1");
  check_size(c, "construct");
  // Published factorizations for the transformer widths that matter; pinned so
  // the recipe (and thus the matrix) for these sizes never depends on the
  // search order below.
  switch (c) {
    case 768:
      return kron(sylvester(1), paley1(383));
    case 1024:
      return sylvester(10);
    case 1152:
      return kron(sylvester(5), paley2(17));
    case 1280:
      return kron(sylvester(6), paley1(19));
    case 1408:
      return kron(sylvester(5), paley1(43));
    default:
      break;
  }
  if (is_power_of_two(c)) return sylvester(log2_exact(c));
  // Strip Sylvester factors 2^s and look for a Paley core on the residual;
  // smallest s wins, Paley I before Paley II.
  std::size_t r = c;
  std::uint64_t s = 0;
  while (true) {
    const std::uint64_t q1 = r - 1;
    if (q1 >= 3 && q1 % 4 == 3 && is_prime(q1))
      return with_sylvester_factor(s, paley1(q1));
    if (r % 2 == 0) {
      const std::uint64_t q2 = r / 2 - 1;
      if (q2 >= 5 && q2 % 4 == 1 && is_prime(q2))
        return with_sylvester_factor(s, paley2(q2));
    }
    if (r % 2 != 0) break;
    r /= 2;
    ++s;
  }
  throw NoKnownConstruction("construct: no Sylvester/Paley plan for size " +
                            std::to_string(c));
}

HadamardMatrix replay(const Recipe& r) {
  switch (r.kind) {
    case Recipe::Kind::Sylvester: return sylvester(r.param);
    case Recipe::Kind::Paley1: return paley1(r.param);
    case Recipe::Kind::Paley2: return paley2(r.param);
    case Recipe::Kind::Kron: return kron(replay(*r.left), replay(*r.right));
  }
  throw Error(ErrorCode::Generic, "replay: invalid recipe");
}

ValidationReport validate(const HadamardMatrix& h) {
  const std::size_t n = h.size();
  Matrix g = kernels::matmul_nt(h.entries, h.entries);
  double resid = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      resid = std::max(resid, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  const double target = 1.0 / std::sqrt(double(n));
  double mag = 0.0;
  for (double v : h.entries.data) mag = std::max(mag, std::abs(std::abs(v) - target));
  return ValidationReport{resid, mag};
}

}  // namespace isonorm::hadamard
