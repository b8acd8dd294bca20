#include <doctest.h>

#include <cmath>

#include "kronprec/linalg.hpp"
#include "kronprec/rng.hpp"
#include "oracles.hpp"

using namespace kronprec;

TEST_CASE("cholesky small cases") {
    CHECK(cholesky(Matrix::identity(3)) == Matrix::identity(3));
    const Matrix l = cholesky(Matrix{{4, 2}, {2, 5}});
    CHECK(l(0, 0) == doctest::Approx(2.0));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("cholesky reconstructs a random 6x6 SPD matrix") {
    NormalStream z(11);
    Matrix a(6, 6);
    for (double& v : a.values()) v = z.next();
    Matrix m = oracle::naive_product(a.transposed(), a) + Matrix::identity(6);
    const SpdMatrix spd(m);
    const Matrix l = cholesky(spd);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) CHECK(l(i, j) == 0.0);
    CHECK(oracle::max_abs(oracle::naive_product(l, l.transposed()), m) <= 1e-10);
}

TEST_CASE("SpdMatrix rejects indefinite and asymmetric input") {
    try {
        SpdMatrix bad{{1, 2}, {2, 1}};
        FAIL("expected NotPositiveDefinite");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
    }
    try {
        SymMatrix bad{{1, 0.5}, {0.4, 1}};
        FAIL("expected asymmetry rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
    // tiny asymmetry gets averaged away
    const SymMatrix s{{1, 0.5}, {0.5 + 1e-14, 1}};
    CHECK(s(0, 1) == s(1, 0));
}

TEST_CASE("log_det examples") {
    CHECK(log_det(SpdMatrix::identity(4)) == 0.0);
    const double d[] = {2.0, 8.0};
    CHECK(log_det(SpdMatrix(Matrix::diagonal(d))) == doctest::Approx(std::log(16.0)).epsilon(1e-14));
    CHECK(log_det(SpdMatrix{{4, 2}, {2, 5}}) == doctest::Approx(2.7725887222397811).epsilon(1e-14));
}

TEST_CASE("log_det and inverse agree with LU / Gauss-Jordan oracles") {
    NormalStream z(5);
    for (int t = 0; t < 10; ++t) {
        const std::size_t dim = 2 + static_cast<std::size_t>(t);
        const Matrix m = oracle::random_spd(dim, z);
        const SpdMatrix spd(m);
        CHECK(std::abs(log_det(spd) - oracle::lu_log_det(m)) <= 1e-10);
        CHECK(oracle::max_abs(inverse(spd), oracle::gauss_jordan_inverse(m)) <= 1e-9);
        const Matrix b = oracle::random_symmetric(dim, z);
        CHECK(oracle::max_abs(oracle::naive_product(m, solve(spd, b)), b) <= 1e-9);
    }
}

TEST_CASE("sym_eigen examples") {
    const double d[] = {3.0, 1.0, 2.0};
    auto e = sym_eigen(SymMatrix(Matrix::diagonal(d)));
    REQUIRE(e.values.size() == 3);
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(2.0));
    CHECK(e.values[2] == doctest::Approx(3.0));
    e = sym_eigen(SymMatrix{{2, 1}, {1, 2}});
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(3.0));
}

TEST_CASE("sym_eigen residual and orthonormality on random 8x8") {
    NormalStream z(21);
    const Matrix a = oracle::random_symmetric(8, z);
    const auto e = sym_eigen(SymMatrix(a));
    Matrix lambda(8, 8);
    for (std::size_t k = 0; k < 8; ++k) lambda(k, k) = e.values[k];
    const Matrix r = oracle::naive_product(a, e.vectors) - oracle::naive_product(e.vectors, lambda);
    CHECK(frobenius_norm(r) <= 1e-9 * frobenius_norm(a));
    const Matrix vtv = oracle::naive_product(e.vectors.transposed(), e.vectors);
    CHECK(oracle::max_abs(vtv, Matrix::identity(8)) <= 1e-10);
    for (std::size_t k = 1; k < 8; ++k) CHECK(e.values[k - 1] <= e.values[k]);
}

TEST_CASE("eigenvalue-only path agrees with Jacobi") {
    NormalStream z(8);
    for (std::size_t dim : {1u, 2u, 5u, 17u, 40u}) {
        const SymMatrix a(oracle::random_symmetric(dim, z));
        const auto full = sym_eigen(a).values;
        const auto fast = sym_eigenvalues(a);
        REQUIRE(fast.size() == dim);
        for (std::size_t k = 0; k < dim; ++k) CHECK(std::abs(full[k] - fast[k]) <= 1e-10);
    }
}

TEST_CASE("spectral_norm examples and power-iteration oracle") {
    CHECK(spectral_norm(SymMatrix::identity(5)) == doctest::Approx(1.0));
    const double d[] = {3.0, -5.0};
    CHECK(spectral_norm(SymMatrix(Matrix::diagonal(d))) == doctest::Approx(5.0));
    CHECK(spectral_norm(SymMatrix{{2, 1}, {1, 2}}) == doctest::Approx(3.0));
    NormalStream z(9);
    for (int t = 0; t < 5; ++t) {
        const Matrix a = oracle::random_symmetric(12, z);
        CHECK(spectral_norm(SymMatrix(a)) == doctest::Approx(oracle::power_spectral_norm(a)).epsilon(1e-7));
    }
}

TEST_CASE("frobenius_norm examples") {
    CHECK(frobenius_norm(Matrix(3, 3)) == 0.0);
    CHECK(frobenius_norm(Matrix{{3, 4}, {0, 0}}) == doctest::Approx(5.0));
    CHECK(frobenius_norm(Matrix::identity(7)) == doctest::Approx(std::sqrt(7.0)));
}

TEST_CASE("kron examples and mixed-product identity") {
    CHECK(kron(Matrix::identity(2), Matrix::identity(3)) == Matrix::identity(6));
    CHECK(kron(Matrix{{2}}, Matrix::identity(2)) == Matrix{{2, 0}, {0, 2}});
    NormalStream z(4);
    auto rnd = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.values()) v = z.next();
        return m;
    };
    const Matrix a = rnd(2, 2), b = rnd(3, 3), c = rnd(2, 2), d = rnd(3, 3);
    const Matrix lhs = oracle::naive_product(kron(a, b), kron(c, d));
    const Matrix rhs = kron(oracle::naive_product(a, c), oracle::naive_product(b, d));
    CHECK(oracle::max_abs(lhs, rhs) <= 1e-12);
    try {
        (void)kron(Matrix(10, 10), Matrix(10, 10), 99);
        FAIL("expected DimensionCap");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionCap);
    }
}

TEST_CASE("vec stacks columns") {
    const Matrix v = vec(Matrix{{1, 2}, {3, 4}});
    CHECK(v == Matrix{{1}, {3}, {2}, {4}});
}

TEST_CASE("max_abs_entry_diff examples") {
    CHECK(max_abs_entry_diff(Matrix::identity(3), Matrix::identity(3)) == 0.0);
    CHECK(max_abs_entry_diff(Matrix::identity(2), Matrix(2, 2)) == 1.0);
    CHECK(max_abs_entry_diff(Matrix{{1, 2}, {2, 1}}, Matrix{{0, 5}, {5, 0}}) == 3.0);
    try {
        (void)max_abs_entry_diff(Matrix(2, 2), Matrix(2, 3));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
}
