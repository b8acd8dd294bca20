#include "kronprec/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kronprec {

double off_diagonal_l1(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j) s += std::abs(m(i, j));
    return s;
}

double glasso_objective(const SymMatrix& a, double rho, const SpdMatrix& theta) {
    return trace_of_product(a, theta) - log_det(theta) + rho * off_diagonal_l1(theta);
}

double kkt_residual(const SymMatrix& a, double rho, const SpdMatrix& theta, const Matrix& w) {
    require_same_shape(a, theta, "kkt_residual");
    const std::size_t d = a.dim();
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double g = a(i, j) - w(i, j);
            double v;
            if (i == j) {
                v = std::abs(g);
            } else if (theta(i, j) != 0.0) {
                v = std::abs(g + rho * (theta(i, j) > 0.0 ? 1.0 : -1.0));
            } else {
                v = std::max(0.0, std::abs(g) - rho);
            }
            worst = std::max(worst, v);
        }
    }
    return worst;
}

double kkt_residual(const SymMatrix& a, double rho, const SpdMatrix& theta) {
    return kkt_residual(a, rho, theta, inverse(theta));
}

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

void validate(const GlassoProblem& pb) {
    if (!(pb.rho >= 0.0) || !std::isfinite(pb.rho)) {
        throw Error(ErrorKind::InvalidArgument, "rho must be finite and >= 0");
    }
    if (!(pb.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
    if (pb.max_sweeps < 1) throw Error(ErrorKind::InvalidArgument, "max_sweeps must be >= 1");
    for (std::size_t i = 0; i < pb.a.dim(); ++i) {
        if (!(pb.a(i, i) > 0.0)) {
            throw Error(ErrorKind::InvalidArgument,
                        "glasso input needs a positive diagonal (index " + std::to_string(i) + ")");
        }
    }
    if (pb.rho == 0.0) {
        try {
            (void)cholesky(pb.a.matrix());
        } catch (const Error&) {
            throw Error(ErrorKind::NotPositiveDefinite,
                        "unpenalized problem with singular input matrix is ill-posed");
        }
    }
}

// One block update of row/column j. `theta` and `w` are full symmetric
// matrices, updated in place.
void update_block(const SymMatrix& a, double rho, double inner_tol, std::size_t j, Matrix& theta,
                  Matrix& w) {
    const std::size_t d = a.dim();
    const std::size_t m = d - 1;
    auto full = [j](std::size_t k) { return k < j ? k : k + 1; };

    // inv(Theta_11) = W_11 - w_12 w_12^T / w_22
    Matrix inv11(m, m);
    const double w22 = w(j, j);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = r; c < m; ++c) {
            const double v = w(full(r), full(c)) - w(full(r), j) * w(full(c), j) / w22;
            inv11(r, c) = v;
            inv11(c, r) = v;
        }

    const double a22 = a(j, j);
    std::vector<double> x(m);
    std::vector<double> a12(m);
    for (std::size_t k = 0; k < m; ++k) {
        x[k] = theta(full(k), j);
        a12[k] = a(full(k), j);
    }
    // Lasso: min 0.5 x^T (a22 inv11) x + a12^T x + rho |x|_1; grad keeps a22 inv11 x.
    std::vector<double> grad(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += inv11(r, c) * x[c];
        grad[r] = a22 * s;
    }
    constexpr int kMaxPasses = 10000;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        double biggest = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double hkk = a22 * inv11(k, k);
            const double partial = a12[k] + grad[k] - hkk * x[k];
            const double next = -soft_threshold(partial, rho) / hkk;
            const double delta = next - x[k];
            if (delta == 0.0) continue;
            x[k] = next;
            for (std::size_t r = 0; r < m; ++r) grad[r] += a22 * inv11(r, k) * delta;
            biggest = std::max(biggest, std::abs(delta) * hkk);
        }
        if (biggest <= inner_tol) break;
    }

    // u = inv11 x; theta_22 = 1/a22 + x^T u keeps the Schur complement at 1/a22.
    std::vector<double> u(m, 0.0);
    double quad = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) u[r] += inv11(r, c) * x[c];
        quad += x[r] * u[r];
    }
    for (std::size_t k = 0; k < m; ++k) {
        theta(full(k), j) = x[k];
        theta(j, full(k)) = x[k];
    }
    theta(j, j) = 1.0 / a22 + quad;

    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = r; c < m; ++c) {
            const double v = inv11(r, c) + a22 * u[r] * u[c];
            w(full(r), full(c)) = v;
            w(full(c), full(r)) = v;
        }
        w(full(r), j) = -a22 * u[r];
        w(j, full(r)) = -a22 * u[r];
    }
    w(j, j) = a22;
}

}  // namespace

GlassoSolution glasso_solve(const GlassoProblem& problem,
                            const std::optional<GlassoSolution>& warm_start) {
    if (warm_start) return glasso_solve(problem, warm_start->theta);
    const std::size_t d = problem.a.dim();
    Matrix diag(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (!(problem.a(i, i) > 0.0)) break;  // validate() reports it
        diag(i, i) = 1.0 / problem.a(i, i);
    }
    validate(problem);
    return glasso_solve(problem, SpdMatrix(std::move(diag)));
}

GlassoSolution glasso_solve(const GlassoProblem& problem, const SpdMatrix& initial_theta) {
    validate(problem);
    const SymMatrix& a = problem.a;
    const std::size_t d = a.dim();
    if (initial_theta.dim() != d) {
        throw Error(ErrorKind::ShapeMismatch, "warm start dimension differs from problem");
    }
    const double rho = problem.rho;
    const double inner_tol = problem.tol / 10.0;

    GlassoSolution sol;
    sol.theta = initial_theta;
    sol.w = inverse(sol.theta);
    sol.objective_trace.push_back(glasso_objective(a, rho, sol.theta));
    sol.kkt_residual = kkt_residual(a, rho, sol.theta, sol.w);
    if (sol.kkt_residual <= problem.tol) {
        sol.converged = true;
        return sol;
    }

    Matrix theta = sol.theta.matrix();
    Matrix w = sol.w.matrix();
    for (int sweep = 1; sweep <= problem.max_sweeps; ++sweep) {
        if (d > 1) {
            for (std::size_t j = 0; j < d; ++j) update_block(a, rho, inner_tol, j, theta, w);
        } else {
            theta(0, 0) = 1.0 / a(0, 0);
        }
        // Refresh W from theta to keep rank-one drift out of the certificate.
        sol.theta = SpdMatrix(SymMatrix(theta));
        sol.w = inverse(sol.theta);
        w = sol.w.matrix();
        sol.sweeps_used = sweep;
        sol.objective_trace.push_back(glasso_objective(a, rho, sol.theta));
        sol.kkt_residual = kkt_residual(a, rho, sol.theta, w);
        if (sol.kkt_residual <= problem.tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

}  // namespace kronprec
