#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "isonorm/errors.hpp"
#include "isonorm/hadamard.hpp"

using namespace isonorm;
using namespace isonorm::testing;

TEST_CASE("sylvester base cases by hand") {
  hadamard::HadamardMatrix h0 = hadamard::sylvester(0);
  REQUIRE(h0.size() == 1);
  CHECK(h0.entries(0, 0) == 1.0);

  hadamard::HadamardMatrix h1 = hadamard::sylvester(1);
  REQUIRE(h1.size() == 2);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(h1.entries(0, 0) == doctest::Approx(r));
  CHECK(h1.entries(0, 1) == doctest::Approx(r));
  CHECK(h1.entries(1, 0) == doctest::Approx(r));
  CHECK(h1.entries(1, 1) == doctest::Approx(-r));
}

TEST_CASE("orthogonality and entry magnitude across constructions") {
  for (std::size_t c : {1u, 2u, 4u, 8u, 12u, 16u, 20u, 24u, 28u, 36u, 48u, 64u,
                        128u, 256u}) {
    hadamard::HadamardMatrix h = hadamard::construct(c);
    REQUIRE(h.size() == c);
    hadamard::ValidationReport rep = hadamard::validate(h);
    CHECK(rep.max_orthogonality_residual < 1e-11 * double(c));
    CHECK(rep.entry_magnitude_error < 1e-12);
  }
}

TEST_CASE("first row and column are positive after normalization") {
  for (std::size_t c : {12u, 20u, 28u, 36u}) {
    hadamard::HadamardMatrix h = hadamard::construct(c);
    for (std::size_t i = 0; i < c; ++i) {
      CHECK(h.entries(0, i) > 0.0);
      CHECK(h.entries(i, 0) > 0.0);
    }
  }
}

TEST_CASE("paley residue classes are enforced") {
  CHECK_NOTHROW(hadamard::paley1(11));   // 11 ≡ 3 (mod 4) → order 12
  CHECK(hadamard::paley1(11).size() == 12);
  CHECK(hadamard::paley2(13).size() == 28);  // 13 ≡ 1 (mod 4) → order 2(q+1)

  CHECK_THROWS_AS(hadamard::paley1(13), InvalidResidueClass);
  CHECK_THROWS_AS(hadamard::paley2(11), InvalidResidueClass);
  CHECK_THROWS_AS(hadamard::paley1(15), NotPrimePower);   // composite
  CHECK_THROWS_AS(hadamard::paley1(27), NotPrimePower);   // prime power, unsupported
  CHECK_THROWS_AS(hadamard::paley2(9), NotPrimePower);
}

TEST_CASE("construct failure modes") {
  CHECK_THROWS_AS(hadamard::construct(668), NoKnownConstruction);
  CHECK_THROWS_AS(hadamard::construct(6), NoKnownConstruction);
  CHECK_THROWS_AS(hadamard::construct(3), NoKnownConstruction);
  CHECK_THROWS_AS(hadamard::construct(hadamard::kMaxSize * 2), SizeLimitExceeded);
}

TEST_CASE("pinned recipes for transformer widths") {
  CHECK(hadamard::construct(768).recipe.to_sexpr() ==
        "(kron (sylvester 1) (paley1 383))");
  CHECK(hadamard::construct(1024).recipe.to_sexpr() == "(sylvester 10)");
  CHECK(hadamard::construct(1152).recipe.to_sexpr() ==
        "(kron (sylvester 5) (paley2 17))");
  CHECK(hadamard::construct(1280).recipe.to_sexpr() ==
        "(kron (sylvester 6) (paley1 19))");
  CHECK(hadamard::construct(1408).recipe.to_sexpr() ==
        "(kron (sylvester 5) (paley1 43))");
}

TEST_CASE("replay reproduces construct bit for bit") {
  for (std::size_t c : {16u, 12u, 28u, 40u, 1280u}) {
    hadamard::HadamardMatrix h = hadamard::construct(c);
    hadamard::HadamardMatrix again = hadamard::replay(h.recipe);
    CHECK(bitwise_equal(h.entries, again.entries));
  }
}

TEST_CASE("kron preserves the Hadamard property") {
  hadamard::HadamardMatrix a = hadamard::sylvester(2);
  hadamard::HadamardMatrix b = hadamard::paley1(7);
  hadamard::HadamardMatrix k = hadamard::kron(a, b);
  REQUIRE(k.size() == 32);
  hadamard::ValidationReport rep = hadamard::validate(k);
  CHECK(rep.max_orthogonality_residual < 1e-12 * 32);
  CHECK(rep.entry_magnitude_error < 1e-13);
  CHECK(k.recipe.to_sexpr() == "(kron (sylvester 2) (paley1 7))");
}

TEST_CASE("large pinned sizes stay orthogonal") {
  for (std::size_t c : {768u, 1152u, 1408u}) {
    hadamard::ValidationReport rep = hadamard::validate(hadamard::construct(c));
    CHECK(rep.max_orthogonality_residual < 1e-9);
    CHECK(rep.entry_magnitude_error < 1e-12);
  }
}
