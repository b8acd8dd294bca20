#pragma once

// Closed-form "sample covariance" estimators for matrix-variate data and the
// oracle matrices Q1, Q2, S built with the true parameters.

#include <cstddef>
#include <optional>

#include "kronprec/linalg.hpp"
#include "kronprec/sampling.hpp"

namespace kronprec {

struct HeuristicEstimates {
    SymMatrix sigma_hat;   // 1/(nq) sum_i Y_i Y_i^T
    SymMatrix psi_hat;     // t_h * psi_tilde
    double t_h = 0.0;      // p / tr(sigma_hat)
    SymMatrix psi_tilde;   // 1/(np) sum_i Y_i^T Y_i
    std::optional<SpdMatrix> omega_hat;
    std::optional<SpdMatrix> gamma_hat;
};

SymMatrix heuristic_sigma(const Dataset& data);

/// Also fills sigma_hat, t_h and psi_tilde. Throws DegenerateData when
/// tr(sigma_hat) == 0.
HeuristicEstimates heuristic_psi(const Dataset& data);

/// Inverts both estimates. Throws NotPositiveDefinite when either is singular
/// (typically nq < p or np < q).
HeuristicEstimates heuristic_inverses(HeuristicEstimates est);

inline constexpr std::size_t kDefaultSCap = 4096;

struct OracleDiagnostics {
    SymMatrix q1;  // 1/(nq) sum_i Y_i Gamma0 Y_i^T
    SymMatrix q2;  // 1/(np) sum_i Y_i^T Omega0 Y_i
    std::optional<SymMatrix> s;  // 1/n sum_i vec(Y_i^T) vec(Y_i^T)^T
    double dev_q1 = 0.0;
    double dev_q2 = 0.0;
    std::optional<double> dev_s;
    // Deviations over sqrt(log p/(nq)), sqrt(log q/(np)), sqrt(log pq/n);
    // absent when the logarithm is not positive.
    std::optional<double> scaled_dev_q1;
    std::optional<double> scaled_dev_q2;
    std::optional<double> scaled_dev_s;
};

/// Throws DimensionCap when include_s and p*q > s_cap.
OracleDiagnostics oracle_diagnostics(const Dataset& data, const TrueModel& model, bool include_s,
                                     std::size_t s_cap = kDefaultSCap);

}  // namespace kronprec
