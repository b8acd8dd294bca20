#include <doctest.h>

#include <cmath>

#include "kronprec/assumptions.hpp"
#include "kronprec/smgm.hpp"

using namespace kronprec;

namespace {

AssumptionPoint scheduled(double n, std::size_t p, std::size_t s, double c0) {
    const auto pen = lambda_schedule(static_cast<std::size_t>(n), p, p, s, s, c0);
    return {n, double(p), double(p), double(s), double(s), pen.lambda1, pen.lambda2};
}

}  // namespace

TEST_CASE("hand-computed point n=100, p=q=10, s=10, lambda=0.01") {
    const auto v = evaluate_assumptions({100, 10, 10, 10, 10, 0.01, 0.01});
    const double l10 = std::log(10.0);
    CHECK(std::abs(v.a1_row - 20 * l10 / 1000) <= 1e-15);
    CHECK(v.a1_row == doctest::Approx(0.046052).epsilon(1e-5));
    CHECK(std::abs(v.a1_col - v.a1_row) == 0.0);
    // lambda / (p^-1 sqrt(1 + 10/11) sqrt(log 10 / 1000))
    const double a3 = 0.01 / (0.1 * std::sqrt(21.0 / 11.0) * std::sqrt(l10 / 1000.0));
    CHECK(std::abs(v.a3_ratio1 - a3) <= 1e-12 * a3);
    const double a4 = l10 / (1e-4 * 100.0 * 100.0 * 10.0);
    CHECK(std::abs(v.a4_val1 - a4) <= 1e-12 * a4);
    // r_n terms: 1, s2/q = 1, s1 q/p = 10, 20 log10 / (1e-4 * 100 * 1000), 20 log10 / (1e-4*100*10*1000)
    const double r = std::max({1.0, 1.0, 10.0, 20 * l10 / 10.0, 20 * l10 / 100.0});
    CHECK(std::abs(v.r_n - r) <= 1e-12 * r);
    CHECK(v.r_n == v.r_n_prime);
    CHECK(std::abs(v.a5_r_n - r * std::log(100.0) / 100.0) <= 1e-12);
    CHECK(std::abs(v.h2_row - 10.0 / 1000.0) <= 1e-15);
}

TEST_CASE("asymmetric point against formulas written out") {
    const double n = 50, p = 3, q = 7, s1 = 2, s2 = 5, l1 = 0.02, l2 = 0.03;
    const auto v = evaluate_assumptions({n, p, q, s1, s2, l1, l2});
    const double lp = std::log(3.0), lq = std::log(7.0);
    CHECK(std::abs(v.a1_col - 12 * lq / 150) <= 1e-15);
    const double t1 = (q + s2) * lq / (l1 * l1 * n * 27);
    const double t2 = (p + s1) * lp / (l2 * l2 * n * 3 * 343);
    CHECK(std::abs(v.r_n - std::max({1.0, s2 / q, s1 * q / p, t1, t2})) <= 1e-12 * v.r_n);
    const double u1 = (p + s1) * lp / (l2 * l2 * n * 343);
    const double u2 = (q + s2) * lq / (l1 * l1 * n * 7 * 27);
    CHECK(std::abs(v.r_n_prime - std::max({1.0, s1 / p, s2 * p / q, u1, u2})) <= 1e-12 * v.r_n_prime);
    CHECK(std::abs(v.h2_col - 7.0 / 150.0) <= 1e-15);
    CHECK(std::abs(v.h2_row - std::log(50.0) / 350.0) <= 1e-15);
}

TEST_CASE("sufficient schedule with n doubling and p = q growing") {
    // Along the schedule a4 = (s+1)/(c0^2 p): it only falls when p grows.
    std::vector<AssumptionPoint> grid;
    std::size_t p = 4;
    for (double n : {100.0, 200.0, 400.0, 800.0}) grid.push_back(scheduled(n, p++, 0, 1.0));
    const auto rep = check_assumptions(grid);
    for (const auto& [name, ok] : rep.verdicts) {
        CAPTURE(name);
        if (name.rfind("a3", 0) == 0) continue;
        CHECK(ok);
    }
    for (const auto& v : rep.values) CHECK(v.r_n == v.r_n_prime);
}

TEST_CASE("at fixed p the schedule pins a4") {
    const auto a = evaluate_assumptions(scheduled(100, 8, 0, 1.0));
    const auto b = evaluate_assumptions(scheduled(800, 8, 0, 1.0));
    CHECK(a.a4_val1 == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    CHECK(b.a4_val1 == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("fixed lambda eventually breaks the lambda upper bound") {
    std::vector<AssumptionPoint> grid;
    for (double n : {100.0, 1000.0, 10000.0}) grid.push_back({n, 10, 10, 0, 0, 0.01, 0.01});
    const auto rep = check_assumptions(grid);
    bool a3 = true;
    for (const auto& [name, ok] : rep.verdicts)
        if (name == "a3_ratio1") a3 = ok;
    CHECK_FALSE(a3);
    CHECK_FALSE(rep.all_pass());
}

TEST_CASE("all values finite and nonnegative; bad grids rejected") {
    const auto v = evaluate_assumptions(scheduled(1000, 20, 5, 0.5));
    for (double x : {v.a1_row, v.a1_col, v.a3_ratio1, v.a3_ratio2, v.a4_val1, v.a4_val2, v.r_n,
                     v.r_n_prime, v.a5_r_n, v.a5_r_n_prime, v.h2_row, v.h2_col}) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0);
    }
    CHECK_THROWS_AS(evaluate_assumptions({10, 1, 5, 0, 0, 0.1, 0.1}), Error);
    CHECK_THROWS_AS(evaluate_assumptions({10, 5, 5, 0, 0, 0.0, 0.1}), Error);
    CHECK_THROWS_AS(check_assumptions({scheduled(1000, 5, 0, 1), scheduled(100, 5, 0, 1)}), Error);
}
