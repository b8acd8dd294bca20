#pragma once

// l1-penalized Gaussian likelihood:
//   minimize_{Theta > 0}  tr(A Theta) - log|Theta| + rho * sum_{i != j} |Theta_ij|
// solved by primal block coordinate descent over rows/columns. Each block is
// a lasso in the off-diagonal column, solved by cyclic coordinate descent with
// soft thresholding; the diagonal entry then has a closed form. The inverse
// W = Theta^{-1} is carried along with rank-one updates, so W_jj = A_jj after
// every block update.

#include <optional>
#include <vector>

#include "kronprec/linalg.hpp"

namespace kronprec {

inline constexpr double kDefaultGlassoTol = 1e-7;
inline constexpr int kDefaultGlassoSweeps = 500;

struct GlassoProblem {
    SymMatrix a;  // strictly positive diagonal
    double rho = 0.0;
    double tol = kDefaultGlassoTol;  // on the KKT residual
    int max_sweeps = kDefaultGlassoSweeps;
};

struct GlassoSolution {
    SpdMatrix theta;
    SpdMatrix w;  // theta^{-1}
    double kkt_residual = 0.0;
    int sweeps_used = 0;
    bool converged = false;
    /// Penalized objective at the start and after every sweep.
    std::vector<double> objective_trace;
};

/// Does not throw on an exhausted sweep budget; the last iterate is returned
/// with converged == false. Throws NotPositiveDefinite when rho == 0 and A is
/// singular, InvalidArgument for a non-positive diagonal or negative rho.
GlassoSolution glasso_solve(const GlassoProblem& problem,
                            const std::optional<GlassoSolution>& warm_start = std::nullopt);

/// Warm start from a bare precision matrix.
GlassoSolution glasso_solve(const GlassoProblem& problem, const SpdMatrix& initial_theta);

/// Largest violation of the stationarity conditions at theta:
///   |A_ii - W_ii| on the diagonal,
///   |A_ij - W_ij + rho sign(Theta_ij)| where Theta_ij != 0,
///   max(0, |A_ij - W_ij| - rho) where Theta_ij == 0.
double kkt_residual(const SymMatrix& a, double rho, const SpdMatrix& theta);
double kkt_residual(const SymMatrix& a, double rho, const SpdMatrix& theta, const Matrix& w);

double glasso_objective(const SymMatrix& a, double rho, const SpdMatrix& theta);

/// sum_{i != j} |m_ij|
double off_diagonal_l1(const Matrix& m);

}  // namespace kronprec
