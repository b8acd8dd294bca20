#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "kronprec/rng.hpp"
#include "kronprec/sampling.hpp"
#include "oracles.hpp"

using namespace kronprec;

TEST_CASE("splitmix64 and xoshiro reference outputs") {
    // splitmix64 from state 0: published first outputs.
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ULL);
    Xoshiro256 a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 16; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs = differs || x != c();
    }
    CHECK(differs);
}

TEST_CASE("derive_seed depends on every coordinate and their order") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 5; ++i)
        for (std::uint64_t j = 0; j < 5; ++j) seen.insert(derive_seed(7, {i, j}));
    CHECK(seen.size() == 25);
    CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
    CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
    CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("uniform lies in [0, 1)") {
    Xoshiro256 g(3);
    for (int i = 0; i < 100000; ++i) {
        const double u = g.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
    }
}

TEST_CASE("normal stream moments over 1e6 draws") {
    NormalStream z = standard_normal_stream(2024);
    const int n = 1000000;
    double sum = 0.0;
    int inside = 0;
    for (int i = 0; i < n; ++i) {
        const double x = z.next();
        sum += x;
        if (x > -1.96 && x < 1.96) ++inside;
    }
    const double mean = sum / n;
    CHECK(mean > -0.01);
    CHECK(mean < 0.01);
    const double frac = static_cast<double>(inside) / n;
    CHECK(frac > 0.947);
    CHECK(frac < 0.953);
    NormalStream z1(5), z2(5);
    for (int i = 0; i < 101; ++i) CHECK(z1.next() == z2.next());
}

namespace {

void check_model_invariants(const TrueModel& m) {
    CHECK(m.psi0.matrix().trace() == doctest::Approx(static_cast<double>(m.q)).epsilon(1e-12));
    for (const SpdMatrix* cov : {&m.sigma0, &m.psi0}) {
        for (double ev : sym_eigen(cov->sym()).values) {
            CHECK(ev > m.tau1);
            CHECK(ev < 1.0 / m.tau1);
        }
    }
    CHECK(oracle::max_abs(oracle::naive_product(m.sigma0, m.omega0), Matrix::identity(m.p)) <= 1e-10);
    CHECK(oracle::max_abs(oracle::naive_product(m.psi0, m.gamma0), Matrix::identity(m.q)) <= 1e-10);
    auto count_off = [](const Matrix& a) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j)
                if (i != j && a(i, j) != 0.0) ++c;
        return c;
    };
    CHECK(count_off(m.omega0) == m.s1);
    CHECK(count_off(m.gamma0) == m.s2);
    CHECK(m.support1.size() == m.s1 + m.p);
    CHECK(m.support2.size() == m.s2 + m.q);
}

}  // namespace

TEST_CASE("banded bandwidth 0 gives identity covariances") {
    const TrueModel m = make_true_model(3, 3, BandedDesign{0, 0.3}, 0.5, 1);
    CHECK(oracle::max_abs(m.sigma0, Matrix::identity(3)) <= 1e-12);
    CHECK(oracle::max_abs(m.psi0, Matrix::identity(3)) <= 1e-12);
    CHECK(m.s1 == 0);
    CHECK(m.s2 == 0);
    check_model_invariants(m);
}

TEST_CASE("banded bandwidth 1 is tridiagonal with s1 = 2(p-1)") {
    const TrueModel m = make_true_model(4, 3, BandedDesign{1, 0.45}, 0.3, 1);
    CHECK(m.s1 == 6);
    CHECK(m.s2 == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const auto gap = i > j ? i - j : j - i;
            if (gap == 1) CHECK(m.omega0(i, j) < 0.0);
            if (gap > 1) CHECK(m.omega0(i, j) == 0.0);
        }
    // equal off-diagonals up to the common positive rescaling
    CHECK(m.omega0(0, 1) == doctest::Approx(m.omega0(2, 3)).epsilon(1e-12));
    check_model_invariants(m);
}

TEST_CASE("random support design meets every invariant") {
    const TrueModel m = make_true_model(5, 4, RandomSupportDesign{4, 2, 0.3}, 0.5, 7);
    CHECK(m.s1 == 4);
    CHECK(m.s2 == 2);
    check_model_invariants(m);
    const TrueModel again = make_true_model(5, 4, RandomSupportDesign{4, 2, 0.3}, 0.5, 7);
    CHECK(again.omega0.matrix() == m.omega0.matrix());
}

TEST_CASE("invalid designs are rejected") {
    CHECK_THROWS_AS(make_true_model(3, 3, BandedDesign{3, 0.3}, 0.5, 1), Error);
    CHECK_THROWS_AS(make_true_model(3, 3, RandomSupportDesign{7, 0, 0.3}, 0.5, 1), Error);
    CHECK_THROWS_AS(make_true_model(3, 3, BandedDesign{1, 0.3}, 1.5, 1), Error);
    // tridiagonal spread 2 * 0.45 * 2cos(pi/5) ~ 1.46 exceeds the tau1 = 0.5 corridor width
    CHECK_THROWS_AS(make_true_model(4, 3, BandedDesign{1, 0.45}, 0.5, 1), Error);
    try {
        // strength so large no shift fits the narrow corridor
        (void)make_true_model(6, 6, BandedDesign{2, 5.0}, 0.9, 1);
        FAIL("expected InfeasibleDesign");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InfeasibleDesign);
    }
}

TEST_CASE("sampler moments under identity covariances") {
    const Dataset d = sample_matrix_normal(identity_model(2, 2), 50000, 1);
    REQUIRE(d.samples.size() == 50000);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0.0, s2 = 0.0;
            for (const Matrix& y : d.samples) {
                s += y(i, j);
                s2 += y(i, j) * y(i, j);
            }
            const double mean = s / 50000.0;
            const double var = s2 / 50000.0 - mean * mean;
            CHECK(std::abs(mean) <= 4.0 / std::sqrt(50000.0));
            CHECK(std::abs(var - 1.0) <= 0.05);
        }
    CHECK(sample_matrix_normal(identity_model(2, 2), 50, 1) ==
          sample_matrix_normal(identity_model(2, 2), 50, 1));
}

TEST_CASE("sampler column covariance matches Sigma0") {
    const TrueModel m = model_from_covariances(SpdMatrix{{1, 0.5}, {0.5, 1}}, SpdMatrix::identity(2), 0.3);
    const std::size_t n = 100000;
    const Dataset d = sample_matrix_normal(m, n, 17);
    // Each column of Y is N(0, Sigma0); pool both columns.
    const double cnt = 2.0 * n;
    double c00 = 0, c01 = 0, c11 = 0;
    double q00 = 0, q01 = 0, q11 = 0;
    for (const Matrix& y : d.samples)
        for (std::size_t col = 0; col < 2; ++col) {
            const double a = y(0, col), b = y(1, col);
            c00 += a * a; c01 += a * b; c11 += b * b;
            q00 += a * a * a * a; q01 += a * a * b * b; q11 += b * b * b * b;
        }
    auto se = [&](double sum, double sumsq) {
        const double mean = sum / cnt;
        return std::sqrt((sumsq / cnt - mean * mean) / cnt);
    };
    // Samples in the same Y share no column correlation (Psi0 = I), so pooling is independent.
    CHECK(std::abs(c00 / cnt - 1.0) <= 3 * se(c00, q00));
    CHECK(std::abs(c01 / cnt - 0.5) <= 3 * se(c01, q01));
    CHECK(std::abs(c11 / cnt - 1.0) <= 3 * se(c11, q11));
}

TEST_CASE("dataset text round trip is exact") {
    const TrueModel m = make_true_model(3, 2, BandedDesign{1, 0.3}, 0.5, 2);
    const Dataset d = sample_matrix_normal(m, 4, 99);
    std::stringstream ss;
    write_dataset(ss, d);
    const std::string text = ss.str();
    CHECK(text.rfind("kronprec-dataset 1\nn,p,q,seed\n4,3,2,99\n", 0) == 0);
    std::istringstream in(text);
    CHECK(read_dataset(in) == d);
}

TEST_CASE("dataset parser reports line numbers") {
    std::istringstream in("kronprec-dataset 1\nn,p,q,seed\n1,2,2,0\n1,2\n3,oops\n");
    try {
        (void)read_dataset(in);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
        CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
    std::istringstream future("kronprec-dataset 2\nn,p,q,seed\n1,1,1,0\n1\n");
    CHECK_THROWS_AS(read_dataset(future), Error);
}
