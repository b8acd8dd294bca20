#pragma once

// Sparse matrix-variate Gaussian model (SMGM) estimator. The objective is
//
//   g(Omega, Gamma) = 1/(npq) sum_i tr(Y_i Gamma Y_i^T Omega)
//                     - (1/p) log|Omega| - (1/q) log|Gamma|
//                     + lambda1 sum_{i!=j} |Omega_ij| + lambda2 sum_{i!=j} |Gamma_ij|
//
// and is minimized by alternating exact half-steps. With Gamma fixed the
// Omega problem is (1/p)[tr(A_Gamma Omega) - log|Omega|] + lambda1 |Omega|_off,
// i.e. a graphical lasso on A_Gamma = 1/(nq) sum_i Y_i Gamma Y_i^T with
// penalty p * lambda1 (and symmetrically q * lambda2 for Gamma).

#include <cstddef>
#include <utility>
#include <vector>

#include "kronprec/glasso.hpp"
#include "kronprec/linalg.hpp"
#include "kronprec/sampling.hpp"

namespace kronprec {

struct PenaltyConfig {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

enum class InitKind { Identity, Heuristic };

struct SmgmOptions {
    InitKind init = InitKind::Identity;
    double outer_tol = 1e-8;  // relative objective change (floored at 1)
    int max_outer = 100;
    double glasso_tol = kDefaultGlassoTol;
    int glasso_max_sweeps = kDefaultGlassoSweeps;
    // After each pair of half-steps, move to the best point on the curve
    // (c Omega, Gamma / c); only the penalty varies along it.
    bool balance_scale = true;
};

struct FitResult {
    SpdMatrix omega_hat;
    SpdMatrix gamma_hat;
    std::vector<double> objective_trace;  // initial value, then one per half-step
                                          // (the Gamma entry includes the scale move)
    int outer_iterations = 0;
    bool converged = false;
    std::pair<double, double> half_step_kkt{0.0, 0.0};  // (Omega step, Gamma step)
    int glasso_sweeps = 0;
    // Set on a non-converged fit when exactly one factor has all off-diagonal
    // entries at zero while both penalties are positive: the objective then
    // keeps decreasing along (c Omega, Gamma / c) and has no minimizer there.
    bool scale_unbounded = false;
};

double objective(const Dataset& data, const SpdMatrix& omega, const SpdMatrix& gamma,
                 const PenaltyConfig& penalty);

/// Objective with lambda1 = lambda2 = 0; invariant under (c Omega, Gamma / c).
double likelihood_part(const Dataset& data, const SpdMatrix& omega, const SpdMatrix& gamma);

/// A_Gamma = 1/(nq) sum_i Y_i Gamma Y_i^T. `gamma` need not be definite.
SymMatrix half_step_row(const Dataset& data, const Matrix& gamma);
/// B_Omega = 1/(np) sum_i Y_i^T Omega Y_i.
SymMatrix half_step_col(const Dataset& data, const Matrix& omega);

/// Flip-flop fit. Throws IllPosed when an unpenalized half-step has a singular
/// input; an exhausted iteration budget is reported through `converged`.
FitResult smgm_fit(const Dataset& data, const PenaltyConfig& penalty,
                   const SmgmOptions& options = {});

/// lambda1 = c0 sqrt(log p / (npq (s1 + 1))), lambda2 = c0 sqrt(log q / (npq (s2 + 1))).
/// Throws DomainError for p < 2 or q < 2.
PenaltyConfig lambda_schedule(std::size_t n, std::size_t p, std::size_t q, std::size_t s1_guess,
                              std::size_t s2_guess, double c0);

/// Terms of g(Omega0 + Delta1, Gamma0 + Delta2) - g(Omega0, Gamma0).
struct DecompositionTerms {
    double t1 = 0.0;  // row sampling term
    double t2 = 0.0;  // column sampling term
    double t3 = 0.0;  // cross term
    double t4 = 0.0;  // -log det curvature, rows
    double t5 = 0.0;  // -log det curvature, columns
    double t6 = 0.0;  // penalty off the true support
    double t7 = 0.0;  // penalty on the true support
    double direct_difference = 0.0;

    double sum() const { return t1 + t2 + t3 + t4 + t5 + t6 + t7; }
    double residual() const { return sum() - direct_difference; }
};

/// T4 and T5 use the closed form (1/p)[tr(Sigma0 Delta1) - log|Omega0 + Delta1| + log|Omega0|].
/// Throws NotPositiveDefinite when a perturbed matrix leaves the cone.
DecompositionTerms decompose_objective_difference(const Dataset& data, const TrueModel& model,
                                                  const SymMatrix& delta1,
                                                  const SymMatrix& delta2,
                                                  const PenaltyConfig& penalty);

}  // namespace kronprec
