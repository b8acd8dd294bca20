#pragma once

// Numerical audit of the growth/tuning conditions behind the SMGM and
// heuristic rate results, evaluated along an ordered grid.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace kronprec {

struct AssumptionPoint {
    double n = 0.0, p = 0.0, q = 0.0, s1 = 0.0, s2 = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0;
};

struct AssumptionValues {
    double a1_row = 0.0;     // (p + s1) log p / (nq)
    double a1_col = 0.0;     // (q + s2) log q / (np)
    double a3_ratio1 = 0.0;  // lambda1 / [p^-1 sqrt(1 + p/(s1+1)) sqrt(log p/(nq))]
    double a3_ratio2 = 0.0;
    double a4_val1 = 0.0;    // log p / (lambda1^2 p^2 nq)
    double a4_val2 = 0.0;    // log q / (lambda2^2 q^2 np)
    double r_n = 0.0;
    double r_n_prime = 0.0;
    double a5_r_n = 0.0;        // r_n log(pq) / n
    double a5_r_n_prime = 0.0;  // r_n' log(pq) / n
    double h2_row = 0.0;     // max(p, log n) / (qn)
    double h2_col = 0.0;     // max(q, log n) / (pn)
};

/// Throws DomainError unless every coordinate is positive and p, q >= 2.
AssumptionValues evaluate_assumptions(const AssumptionPoint& point);

// The upper-bound condition on lambda only asks the ratio to stay bounded; a
// ratio growing no faster than n^kA3GrowthExponent between grid points passes.
inline constexpr double kA3GrowthExponent = 0.1;

struct AssumptionReport {
    std::vector<AssumptionPoint> grid;
    std::vector<AssumptionValues> values;
    // name -> verdict, in a fixed order: a1_row, a1_col, a3_ratio1, a3_ratio2,
    // a4_val1, a4_val2, a5, h2_row, h2_col.
    std::vector<std::pair<std::string, bool>> verdicts;
    bool all_pass() const;
};

/// Grid points must be ordered by n (non-decreasing).
AssumptionReport check_assumptions(const std::vector<AssumptionPoint>& grid);

}  // namespace kronprec
