#include "kronprec/heuristic.hpp"

#include <cmath>

#include "kronprec/smgm.hpp"

namespace kronprec {

namespace {

// sum_i Y_i Y_i^T (transpose = false) or sum_i Y_i^T Y_i (transpose = true),
// upper triangle computed and mirrored.
Matrix gram_sum(const Dataset& data, bool transpose) {
    const std::size_t d = transpose ? data.q : data.p;
    Matrix acc(d, d);
    for (const Matrix& y0 : data.samples) {
        const Matrix y = transpose ? y0.transposed() : y0;
        for (std::size_t a = 0; a < d; ++a) {
            const auto ya = y.row(a);
            for (std::size_t b = a; b < d; ++b) {
                const auto yb = y.row(b);
                double s = 0.0;
                for (std::size_t k = 0; k < ya.size(); ++k) s += ya[k] * yb[k];
                acc(a, b) += s;
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) acc(b, a) = acc(a, b);
    return acc;
}

std::optional<double> scaled(double deviation, double log_term, double count) {
    if (!(log_term > 0.0)) return std::nullopt;
    return deviation / std::sqrt(log_term / count);
}

}  // namespace

SymMatrix heuristic_sigma(const Dataset& data) {
    Matrix s = gram_sum(data, false);
    s *= 1.0 / static_cast<double>(data.n * data.q);
    return SymMatrix(std::move(s));
}

HeuristicEstimates heuristic_psi(const Dataset& data) {
    HeuristicEstimates est;
    est.sigma_hat = heuristic_sigma(data);
    const double tr = est.sigma_hat.matrix().trace();
    if (!(tr > 0.0)) {
        throw Error(ErrorKind::DegenerateData, "tr(Sigma_H) is zero; all-zero data");
    }
    Matrix tilde = gram_sum(data, true);
    tilde *= 1.0 / static_cast<double>(data.n * data.p);
    est.psi_tilde = SymMatrix(std::move(tilde));
    est.t_h = static_cast<double>(data.p) / tr;
    est.psi_hat = SymMatrix(est.psi_tilde.matrix() * est.t_h);
    return est;
}

HeuristicEstimates heuristic_inverses(HeuristicEstimates est) {
    try {
        est.omega_hat = inverse(SpdMatrix(est.sigma_hat));
        est.gamma_hat = inverse(SpdMatrix(est.psi_hat));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotPositiveDefinite) {
            throw Error(ErrorKind::NotPositiveDefinite,
                        "heuristic estimate is singular (nq < p or np < q?)");
        }
        throw;
    }
    return est;
}

OracleDiagnostics oracle_diagnostics(const Dataset& data, const TrueModel& model, bool include_s,
                                     std::size_t s_cap) {
    if (model.p != data.p || model.q != data.q) {
        throw Error(ErrorKind::ShapeMismatch, "model and dataset shapes differ");
    }
    const std::size_t pq = data.p * data.q;
    if (include_s && pq > s_cap) {
        throw Error(ErrorKind::DimensionCap, "S matrix requested with pq = " + std::to_string(pq) +
                                                 " above s_cap = " + std::to_string(s_cap));
    }
    const double n = static_cast<double>(data.n);
    const double p = static_cast<double>(data.p);
    const double q = static_cast<double>(data.q);

    OracleDiagnostics d;
    d.q1 = half_step_row(data, model.gamma0);
    d.q2 = half_step_col(data, model.omega0);
    d.dev_q1 = max_abs_entry_diff(d.q1, model.sigma0);
    d.dev_q2 = max_abs_entry_diff(d.q2, model.psi0);
    d.scaled_dev_q1 = scaled(d.dev_q1, std::log(p), n * q);
    d.scaled_dev_q2 = scaled(d.dev_q2, std::log(q), n * p);

    if (include_s) {
        // vec(Y^T) is the row-major flattening of Y.
        Matrix s(pq, pq);
        for (const Matrix& y : data.samples) {
            const auto v = y.values();
            for (std::size_t a = 0; a < pq; ++a)
                for (std::size_t b = a; b < pq; ++b) s(a, b) += v[a] * v[b];
        }
        for (std::size_t a = 0; a < pq; ++a)
            for (std::size_t b = a; b < pq; ++b) {
                s(a, b) /= n;
                s(b, a) = s(a, b);
            }
        const Matrix truth = kron(model.sigma0, model.psi0, s_cap * s_cap);
        d.dev_s = max_abs_entry_diff(s, truth);
        d.scaled_dev_s = scaled(*d.dev_s, std::log(p * q), n);
        d.s = SymMatrix(std::move(s));
    }
    return d;
}

}  // namespace kronprec
