#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kronprec/rates.hpp"
#include "kronprec/rng.hpp"

using namespace kronprec;

TEST_CASE("rate predictor hand values") {
    const auto a = rate_predictors(100, 10, 10, 10, 10);
    CHECK(std::abs(a.smgm_omega - 2.0 * std::log(10.0) / 1000.0) <= 1e-15);
    CHECK(a.smgm_omega == doctest::Approx(0.004605170).epsilon(1e-7));
    const auto b = rate_predictors(std::exp(2.0), 2, 2, 0, 0);
    CHECK(b.heur_sigma == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(b.heur_psi == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    const auto c = rate_predictors(100, 10, 10, 0, 10);
    CHECK(c.smgm_omega == doctest::Approx(a.smgm_omega / 2).epsilon(1e-14));
    // log n above p switches the max
    const auto d = rate_predictors(1e6, 2, 5, 0, 0);
    CHECK(d.heur_sigma == doctest::Approx(std::sqrt(std::log(1e6) / 5e6)).epsilon(1e-14));
    CHECK_THROWS_AS(rate_predictors(100, 1, 10, 0, 0), Error);
}

TEST_CASE("slope fits on exact power laws") {
    const auto st = synthetic_slope_selftest();
    CHECK(std::abs(st.slope + 1.0) <= 1e-12);
    CHECK(st.r_squared == doctest::Approx(1.0));
    const double n[] = {100, 200, 400};
    const double half[] = {3 / std::sqrt(100.0), 3 / std::sqrt(200.0), 3 / std::sqrt(400.0)};
    const auto f = fit_rate_slope(n, half);
    CHECK(std::abs(f.slope + 0.5) <= 1e-12);
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    const double two[] = {1, 2};
    CHECK_THROWS_AS(fit_rate_slope(std::span<const double>(n, 2), two), Error);
    const double bad[] = {1, -1, 2};
    CHECK_THROWS_AS(fit_rate_slope(n, bad), Error);
}

TEST_CASE("median and percentile") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(percentile({0, 10}, 0.95) == doctest::Approx(9.5));
    CHECK(percentile({5}, 0.3) == 5.0);
    CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("estimator names") {
    const std::vector<std::string> names{"heuristic", "smgm"};
    const auto set = parse_estimators(names);
    CHECK(set.smgm);
    CHECK(set.heuristic);
    CHECK_FALSE(set.heuristic_precision);
    CHECK(estimator_names(set) == std::vector<std::string>{"smgm", "heuristic"});
    const std::vector<std::string> bad{"lasso"};
    CHECK_THROWS_AS(parse_estimators(bad), Error);
}

TEST_CASE("smoke cell: one replicate, heuristic only") {
    ModelSpec spec;
    spec.p = 2;
    spec.q = 2;
    EstimatorSet est;
    est.heuristic = true;
    const RateCell c = run_cell(spec, 3, {}, 1, est, 5);
    CHECK(c.failed_replicates == 0);
    CHECK(c.errors_heur_sigma.size() == 1);
    CHECK(c.errors_heur_psi.size() == 1);
    CHECK(c.errors_smgm_omega.empty());
    CHECK(c.seeds.size() == 1);
    CHECK(c.predictors.has_value());
    CHECK(run_cell(spec, 3, {}, 1, est, 5) == c);
}

TEST_CASE("cells are deterministic and independent of worker count") {
    ModelSpec spec;
    spec.p = 4;
    spec.q = 3;
    spec.design = BandedDesign{1, 0.3};
    EstimatorSet est{true, true, true};
    const auto pen = lambda_schedule(20, 4, 3, 6, 4, 0.5);
    CellOptions one, four;
    one.workers = 1;
    four.workers = 4;
    const RateCell a = run_cell(spec, 20, pen, 6, est, 11, one);
    const RateCell b = run_cell(spec, 20, pen, 6, est, 11, four);
    CHECK(a == b);
    CHECK(a.seeds[2] == derive_seed(11, {20, 4, 3, 2}));
    // adding replicates leaves earlier ones untouched
    const RateCell c = run_cell(spec, 20, pen, 8, est, 11, one);
    CHECK(std::equal(a.seeds.begin(), a.seeds.end(), c.seeds.begin()));
    if (a.failed_replicates == 0 && c.failed_replicates == 0)
        CHECK(std::equal(a.errors_smgm_omega.begin(), a.errors_smgm_omega.end(), c.errors_smgm_omega.begin()));
}

TEST_CASE("failed replicates are counted with reasons") {
    // n p < q makes Psi_H singular in every replicate
    ModelSpec spec;
    spec.p = 2;
    spec.q = 6;
    EstimatorSet est;
    est.heuristic = true;
    est.heuristic_precision = true;
    const RateCell c = run_cell(spec, 2, {}, 5, est, 3);
    CHECK(c.failed_replicates == 5);
    CHECK(c.failures.size() == 5);
    CHECK(c.errors_heur_sigma.empty());
    CHECK(c.failures[0].second.find("NotPositiveDefinite") != std::string::npos);
    // heuristic alone is fine
    est.heuristic_precision = false;
    const RateCell ok = run_cell(spec, 2, {}, 5, est, 3);
    CHECK(ok.failed_replicates == 0);
    CHECK(ok.errors_heur_sigma.size() + ok.failed_replicates == ok.replicates);
}

TEST_CASE("error metrics are the scaled quantities") {
    ModelSpec spec;
    spec.p = 3;
    spec.q = 3;
    EstimatorSet est{true, false, false};
    const RateCell c = run_cell(spec, 40, {0.01, 0.01}, 3, est, 2);
    REQUIRE(c.failed_replicates == 0);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(c.aligned_smgm_omega[k] <= c.errors_smgm_omega[k] + 1e-15);
        CHECK(c.aligned_smgm_gamma[k] <= c.errors_smgm_gamma[k] + 1e-15);
    }
    const auto s = summarize_cell(c);
    CHECK_FALSE(s.empty());
    for (const auto& m : s) {
        if (m.metric == "smgm_omega") {
            CHECK(m.count == 3);
            CHECK(m.mean == doctest::Approx(std::accumulate(c.errors_smgm_omega.begin(),
                                                            c.errors_smgm_omega.end(), 0.0) / 3));
        }
    }
}

TEST_CASE("heuristic sigma error slope over q is about -1/2") {
    ModelSpec spec;
    spec.p = 10;
    spec.design = BandedDesign{1, 0.3};
    EstimatorSet est;
    est.heuristic = true;
    std::vector<RateCell> cells;
    for (std::size_t q : {10u, 40u, 160u}) {
        spec.q = q;
        cells.push_back(run_cell(spec, 20, {}, 60, est, 77));
    }
    const RateReport rep = build_rate_report(cells);
    bool found = false;
    for (const auto& f : rep.slope_fits) {
        if (f.metric != "heur_sigma" || f.axis != Axis::Q) continue;
        found = true;
        REQUIRE(f.fit.has_value());
        CHECK(f.fit->slope >= -0.65);
        CHECK(f.fit->slope <= -0.35);
        REQUIRE(f.predicted_slope.has_value());
        CHECK(*f.predicted_slope == doctest::Approx(-0.5));
        CHECK(f.verdict.value_or(false));
    }
    CHECK(found);
    bool ratio = false;
    for (const auto& r : rep.ratio_checks)
        if (r.metric == "heur_sigma" && r.axis == Axis::Q) {
            ratio = true;
            CHECK(r.ratios.size() == 2);
        }
    CHECK(ratio);
}

TEST_CASE("report skips regression on cells with too many failures") {
    auto cell = [](std::size_t n, std::size_t failed) {
        RateCell c;
        c.n = n;
        c.p = 4;
        c.q = 4;
        c.replicates = 10;
        c.failed_replicates = failed;
        c.predictors = rate_predictors(double(n), 4, 4, 0, 0);
        c.errors_heur_sigma.assign(10 - failed, 1.0 / std::sqrt(double(n)));
        return c;
    };
    const RateReport rep = build_rate_report({cell(100, 0), cell(200, 5), cell(400, 0)});
    for (const auto& f : rep.slope_fits) {
        if (f.metric != "heur_sigma") continue;
        CHECK_FALSE(f.fit.has_value());
        CHECK(f.cells.size() == 2);
    }
}
