#include "kronprec/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>

#include "kronprec/error.hpp"

namespace kronprec {

namespace {

// The two lambda-dependent arguments of r_n / r_n' share this shape; using
// one helper keeps the two quantities bitwise equal in symmetric settings.
double lambda_term(double dim, double s, double log_dim, double lambda, double n, double a,
                   double b) {
    return (dim + s) * log_dim / (lambda * lambda * n * a * b);
}

}  // namespace

AssumptionValues evaluate_assumptions(const AssumptionPoint& pt) {
    for (double v : {pt.n, pt.p, pt.q, pt.lambda1, pt.lambda2}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::DomainError, "assumption grid values must be positive");
        }
    }
    if (!(pt.s1 >= 0.0) || !(pt.s2 >= 0.0)) {
        throw Error(ErrorKind::DomainError, "sparsity levels must be >= 0");
    }
    if (pt.p < 2.0 || pt.q < 2.0) {
        throw Error(ErrorKind::DomainError, "assumption checks need p >= 2 and q >= 2");
    }
    const double n = pt.n, p = pt.p, q = pt.q, s1 = pt.s1, s2 = pt.s2;
    const double l1 = pt.lambda1, l2 = pt.lambda2;
    const double logp = std::log(p), logq = std::log(q), logn = std::log(n);

    AssumptionValues v;
    v.a1_row = (p + s1) * logp / (n * q);
    v.a1_col = (q + s2) * logq / (n * p);
    v.a3_ratio1 = l1 / (std::sqrt(1.0 + p / (s1 + 1.0)) * std::sqrt(logp / (n * q)) / p);
    v.a3_ratio2 = l2 / (std::sqrt(1.0 + q / (s2 + 1.0)) * std::sqrt(logq / (n * p)) / q);
    v.a4_val1 = logp / (l1 * l1 * p * p * n * q);
    v.a4_val2 = logq / (l2 * l2 * q * q * n * p);

    // r_n  = max(1, s2/q, s1 q/p, (q+s2) log q/(l1^2 n p^3), (p+s1) log p/(l2^2 n p q^3))
    // r_n' = max(1, s1/p, s2 p/q, (p+s1) log p/(l2^2 n q^3), (q+s2) log q/(l1^2 n q p^3))
    v.r_n = std::max({1.0, s2 / q, s1 * q / p, lambda_term(q, s2, logq, l1, n, p * p * p, 1.0),
                      lambda_term(p, s1, logp, l2, n, q * q * q, p)});
    v.r_n_prime =
        std::max({1.0, s1 / p, s2 * p / q, lambda_term(p, s1, logp, l2, n, q * q * q, 1.0),
                  lambda_term(q, s2, logq, l1, n, p * p * p, q)});
    const double logpq = std::log(p * q);
    v.a5_r_n = v.r_n * logpq / n;
    v.a5_r_n_prime = v.r_n_prime * logpq / n;
    v.h2_row = std::max(p, logn) / (q * n);
    v.h2_col = std::max(q, logn) / (p * n);
    return v;
}

bool AssumptionReport::all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.second; });
}

AssumptionReport check_assumptions(const std::vector<AssumptionPoint>& grid) {
    if (grid.empty()) throw Error(ErrorKind::DomainError, "assumption grid is empty");
    AssumptionReport rep;
    rep.grid = grid;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (k > 0 && grid[k].n < grid[k - 1].n) {
            throw Error(ErrorKind::DomainError, "assumption grid must be ordered by n");
        }
        rep.values.push_back(evaluate_assumptions(grid[k]));
    }

    using Field = std::function<double(const AssumptionValues&)>;
    auto decreasing = [&](const Field& f) {
        for (std::size_t k = 1; k < rep.values.size(); ++k)
            if (!(f(rep.values[k]) < f(rep.values[k - 1]))) return false;
        return true;
    };
    auto bounded = [&](const Field& f) {
        for (std::size_t k = 1; k < rep.values.size(); ++k) {
            const double growth = std::log(f(rep.values[k]) / f(rep.values[k - 1]));
            const double allowed = kA3GrowthExponent * std::log(grid[k].n / grid[k - 1].n);
            if (!(growth <= allowed)) return false;
        }
        return true;
    };

    rep.verdicts = {
        {"a1_row", decreasing([](const auto& v) { return v.a1_row; })},
        {"a1_col", decreasing([](const auto& v) { return v.a1_col; })},
        {"a3_ratio1", bounded([](const auto& v) { return v.a3_ratio1; })},
        {"a3_ratio2", bounded([](const auto& v) { return v.a3_ratio2; })},
        {"a4_val1", decreasing([](const auto& v) { return v.a4_val1; })},
        {"a4_val2", decreasing([](const auto& v) { return v.a4_val2; })},
        {"a5", decreasing([](const auto& v) { return v.a5_r_n; }) ||
                   decreasing([](const auto& v) { return v.a5_r_n_prime; })},
        {"h2_row", decreasing([](const auto& v) { return v.h2_row; })},
        {"h2_col", decreasing([](const auto& v) { return v.h2_col; })},
    };
    return rep;
}

}  // namespace kronprec
