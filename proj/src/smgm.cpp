#include "kronprec/smgm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kronprec/heuristic.hpp"

namespace kronprec {

namespace {

void require_shapes(const Dataset& data, const Matrix& omega, const Matrix& gamma) {
    if (omega.rows() != data.p || omega.cols() != data.p) {
        throw Error(ErrorKind::ShapeMismatch, "omega must be p x p");
    }
    if (gamma.rows() != data.q || gamma.cols() != data.q) {
        throw Error(ErrorKind::ShapeMismatch, "gamma must be q x q");
    }
}

// out += scale * left * right^T, upper triangle mirrored so the sum stays symmetric.
void accumulate_symmetric(Matrix& out, const Matrix& left, const Matrix& right, double scale) {
    const std::size_t d = out.rows();
    for (std::size_t a = 0; a < d; ++a) {
        const auto la = left.row(a);
        for (std::size_t b = a; b < d; ++b) {
            const auto rb = right.row(b);
            double s = 0.0;
            for (std::size_t k = 0; k < la.size(); ++k) s += la[k] * rb[k];
            out(a, b) += scale * s;
        }
    }
}

SymMatrix mirror_upper(Matrix m) {
    for (std::size_t a = 0; a < m.rows(); ++a)
        for (std::size_t b = a + 1; b < m.cols(); ++b) m(b, a) = m(a, b);
    return SymMatrix(std::move(m));
}

double penalty_value(const Matrix& omega, const Matrix& gamma, const PenaltyConfig& pen) {
    return pen.lambda1 * off_diagonal_l1(omega) + pen.lambda2 * off_diagonal_l1(gamma);
}

void validate_penalty(const PenaltyConfig& pen) {
    if (!(pen.lambda1 >= 0.0) || !(pen.lambda2 >= 0.0) || !std::isfinite(pen.lambda1) ||
        !std::isfinite(pen.lambda2)) {
        throw Error(ErrorKind::InvalidArgument, "penalties must be finite and >= 0");
    }
}

}  // namespace

SymMatrix half_step_row(const Dataset& data, const Matrix& gamma) {
    if (gamma.rows() != data.q || gamma.cols() != data.q) {
        throw Error(ErrorKind::ShapeMismatch, "half_step_row: gamma must be q x q");
    }
    Matrix acc(data.p, data.p);
    const double scale = 1.0 / static_cast<double>(data.n * data.q);
    for (const Matrix& y : data.samples) {
        // (Y Gamma) Y^T; Gamma symmetric so Y Gamma = Y Gamma^T.
        accumulate_symmetric(acc, multiply_transposed(y, gamma), y, scale);
    }
    return mirror_upper(std::move(acc));
}

SymMatrix half_step_col(const Dataset& data, const Matrix& omega) {
    if (omega.rows() != data.p || omega.cols() != data.p) {
        throw Error(ErrorKind::ShapeMismatch, "half_step_col: omega must be p x p");
    }
    Matrix acc(data.q, data.q);
    const double scale = 1.0 / static_cast<double>(data.n * data.p);
    for (const Matrix& y : data.samples) {
        const Matrix yt = y.transposed();
        // Y^T (Omega Y) = Y^T (Y^T Omega)^T
        accumulate_symmetric(acc, yt, multiply(yt, omega), scale);
    }
    return mirror_upper(std::move(acc));
}

double likelihood_part(const Dataset& data, const SpdMatrix& omega, const SpdMatrix& gamma) {
    require_shapes(data, omega, gamma);
    const double p = static_cast<double>(data.p);
    const double q = static_cast<double>(data.q);
    const SymMatrix a = half_step_row(data, gamma);
    return trace_of_product(a, omega) / p - log_det(omega) / p - log_det(gamma) / q;
}

double objective(const Dataset& data, const SpdMatrix& omega, const SpdMatrix& gamma,
                 const PenaltyConfig& penalty) {
    return likelihood_part(data, omega, gamma) + penalty_value(omega, gamma, penalty);
}

PenaltyConfig lambda_schedule(std::size_t n, std::size_t p, std::size_t q, std::size_t s1_guess,
                              std::size_t s2_guess, double c0) {
    if (p < 2 || q < 2) {
        throw Error(ErrorKind::DomainError, "lambda schedule needs p >= 2 and q >= 2");
    }
    if (n < 1 || !(c0 >= 0.0) || !std::isfinite(c0)) {
        throw Error(ErrorKind::DomainError, "lambda schedule needs n >= 1 and c0 >= 0");
    }
    const double npq = static_cast<double>(n) * static_cast<double>(p) * static_cast<double>(q);
    PenaltyConfig pen;
    pen.lambda1 = c0 * std::sqrt(std::log(static_cast<double>(p)) /
                                 (npq * (static_cast<double>(s1_guess) + 1.0)));
    pen.lambda2 = c0 * std::sqrt(std::log(static_cast<double>(q)) /
                                 (npq * (static_cast<double>(s2_guess) + 1.0)));
    return pen;
}

FitResult smgm_fit(const Dataset& data, const PenaltyConfig& penalty, const SmgmOptions& options) {
    validate_penalty(penalty);
    if (data.n < 1 || data.p < 1 || data.q < 1) {
        throw Error(ErrorKind::InvalidArgument, "dataset must have n, p, q >= 1");
    }
    if (options.max_outer < 1 || !(options.outer_tol > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "max_outer >= 1 and outer_tol > 0 required");
    }
    const std::size_t n = data.n;
    const std::size_t p = data.p;
    const std::size_t q = data.q;
    if (penalty.lambda1 == 0.0 && p > 1 && n * q <= p) {
        throw Error(ErrorKind::IllPosed, "unpenalized row step needs nq > p");
    }
    if (penalty.lambda2 == 0.0 && q > 1 && n * p <= q) {
        throw Error(ErrorKind::IllPosed, "unpenalized column step needs np > q");
    }
    const double pd = static_cast<double>(p);
    const double qd = static_cast<double>(q);
    const double rho_row = pd * penalty.lambda1;
    const double rho_col = qd * penalty.lambda2;

    FitResult fit;
    if (options.init == InitKind::Heuristic) {
        const HeuristicEstimates h = heuristic_psi(data);
        auto ridge_inverse = [](const SymMatrix& m) {
            Matrix r = m.matrix();
            const double eps = 1e-3 * std::max(m.matrix().trace() / static_cast<double>(m.dim()),
                                               1e-12);
            for (std::size_t i = 0; i < m.dim(); ++i) r(i, i) += eps;
            return inverse(SpdMatrix(std::move(r)));
        };
        fit.omega_hat = ridge_inverse(h.sigma_hat);
        fit.gamma_hat = ridge_inverse(h.psi_hat);
    } else {
        fit.omega_hat = SpdMatrix::identity(p);
        fit.gamma_hat = SpdMatrix::identity(q);
    }

    auto solve_half = [&](const SymMatrix& a, double rho, const SpdMatrix& warm) {
        GlassoProblem pb{a, rho, options.glasso_tol, options.glasso_max_sweeps};
        try {
            return glasso_solve(pb, warm);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NotPositiveDefinite ||
                e.kind() == ErrorKind::InvalidArgument) {
                throw Error(ErrorKind::IllPosed, std::string("half-step failed: ") + e.what());
            }
            throw;
        }
    };

    double current = objective(data, fit.omega_hat, fit.gamma_hat, penalty);
    fit.objective_trace.push_back(current);

    SymMatrix next_a = half_step_row(data, fit.gamma_hat);
    for (int outer = 1; outer <= options.max_outer; ++outer) {
        const double previous = current;

        const SymMatrix a = next_a;
        GlassoSolution row = solve_half(a, rho_row, fit.omega_hat);
        fit.omega_hat = row.theta;
        fit.glasso_sweeps += row.sweeps_used;
        const double log_det_gamma = log_det(fit.gamma_hat);
        current = (trace_of_product(a, fit.omega_hat) - log_det(fit.omega_hat)) / pd -
                  log_det_gamma / qd + penalty_value(fit.omega_hat, fit.gamma_hat, penalty);
        fit.objective_trace.push_back(current);

        const SymMatrix b = half_step_col(data, fit.omega_hat);
        GlassoSolution col = solve_half(b, rho_col, fit.gamma_hat);
        fit.gamma_hat = col.theta;
        fit.glasso_sweeps += col.sweeps_used;
        current = (trace_of_product(b, fit.gamma_hat) - log_det(fit.gamma_hat)) / qd -
                  log_det(fit.omega_hat) / pd +
                  penalty_value(fit.omega_hat, fit.gamma_hat, penalty);

        // min_c c*l1 + l2/c at c = sqrt(l2/l1); the likelihood part is unchanged.
        const double l1 = penalty.lambda1 * off_diagonal_l1(fit.omega_hat);
        const double l2 = penalty.lambda2 * off_diagonal_l1(fit.gamma_hat);
        if (options.balance_scale && l1 > 0.0 && l2 > 0.0) {
            const double c = std::sqrt(l2 / l1);
            fit.omega_hat = SpdMatrix(SymMatrix(fit.omega_hat.matrix() * c));
            fit.gamma_hat = SpdMatrix(SymMatrix(fit.gamma_hat.matrix() * (1.0 / c)));
            current -= l1 + l2 - 2.0 * std::sqrt(l1 * l2);
        }
        fit.objective_trace.push_back(current);

        fit.outer_iterations = outer;
        // Stationarity of the current pair in each block, not just of the
        // half-step that produced it: the other factor has moved since.
        next_a = half_step_row(data, fit.gamma_hat);
        fit.half_step_kkt.first = kkt_residual(next_a, rho_row, fit.omega_hat);
        fit.half_step_kkt.second =
            kkt_residual(half_step_col(data, fit.omega_hat), rho_col, fit.gamma_hat);
        const bool flat =
            std::abs(previous - current) < options.outer_tol * std::max(1.0, std::abs(current));
        const bool stationary = fit.half_step_kkt.first <= options.glasso_tol &&
                                fit.half_step_kkt.second <= options.glasso_tol;
        if (flat && stationary && row.converged && col.converged) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged && penalty.lambda1 > 0.0 && penalty.lambda2 > 0.0) {
        const bool omega_diag = off_diagonal_l1(fit.omega_hat) == 0.0;
        const bool gamma_diag = off_diagonal_l1(fit.gamma_hat) == 0.0;
        fit.scale_unbounded = omega_diag != gamma_diag;
    }
    return fit;
}

DecompositionTerms decompose_objective_difference(const Dataset& data, const TrueModel& model,
                                                  const SymMatrix& delta1,
                                                  const SymMatrix& delta2,
                                                  const PenaltyConfig& penalty) {
    validate_penalty(penalty);
    if (model.p != data.p || model.q != data.q) {
        throw Error(ErrorKind::ShapeMismatch, "model and dataset shapes differ");
    }
    require_same_shape(delta1, model.omega0, "delta1");
    require_same_shape(delta2, model.gamma0, "delta2");
    const double p = static_cast<double>(data.p);
    const double q = static_cast<double>(data.q);

    const SpdMatrix omega(model.omega0.matrix() + delta1.matrix());
    const SpdMatrix gamma(model.gamma0.matrix() + delta2.matrix());

    DecompositionTerms t;
    const double tr_sigma_delta1 = trace_of_product(model.sigma0, delta1);
    const double tr_psi_delta2 = trace_of_product(model.psi0, delta2);

    t.t1 = trace_of_product(half_step_row(data, model.gamma0), delta1) / p - tr_sigma_delta1 / p;
    t.t2 = trace_of_product(half_step_col(data, model.omega0), delta2) / q - tr_psi_delta2 / q;
    t.t3 = trace_of_product(half_step_row(data, delta2), delta1) / p;
    t.t4 = (tr_sigma_delta1 - (log_det(omega) - log_det(model.omega0))) / p;
    t.t5 = (tr_psi_delta2 - (log_det(gamma) - log_det(model.gamma0))) / q;

    auto split_penalty = [](const Matrix& est, const Matrix& truth,
                            const std::vector<IndexPair>& support, double lambda, double& off,
                            double& on) {
        const std::size_t d = truth.rows();
        std::vector<char> in_support(d * d, 0);
        for (const auto& [i, j] : support) in_support[i * d + j] = 1;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                if (i == j) continue;
                if (in_support[i * d + j]) {
                    on += lambda * (std::abs(est(i, j)) - std::abs(truth(i, j)));
                } else {
                    off += lambda * std::abs(est(i, j) - truth(i, j));
                }
            }
    };
    split_penalty(omega, model.omega0, model.support1, penalty.lambda1, t.t6, t.t7);
    split_penalty(gamma, model.gamma0, model.support2, penalty.lambda2, t.t6, t.t7);

    t.direct_difference = objective(data, omega, gamma, penalty) -
                          objective(data, model.omega0, model.gamma0, penalty);
    return t;
}

}  // namespace kronprec
