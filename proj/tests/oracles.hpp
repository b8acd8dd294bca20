#pragma once

// Reference computations used only by tests. Each one takes a different
// route from the library code it checks: Gauss-Jordan / LU instead of
// Cholesky, explicit Kronecker products instead of Gram sums, power
// iteration instead of tridiagonal QL, direct search instead of block
// coordinate descent.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "kronprec/linalg.hpp"
#include "kronprec/rng.hpp"
#include "kronprec/sampling.hpp"

namespace oracle {

using kronprec::Matrix;

// log|A| by LU with partial pivoting; -inf when a pivot vanishes, NaN when
// the determinant is negative.
inline double lu_log_det(Matrix a) {
    const std::size_t n = a.rows();
    double logdet = 0.0;
    int sign = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) return -std::numeric_limits<double>::infinity();
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            sign = -sign;
        }
        if (a(k, k) < 0) sign = -sign;
        logdet += std::log(std::abs(a(k, k)));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return sign > 0 ? logdet : std::numeric_limits<double>::quiet_NaN();
}

inline Matrix gauss_jordan_inverse(Matrix a) {
    const std::size_t n = a.rows();
    Matrix inv = Matrix::identity(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        for (std::size_t j = 0; j < n; ++j) {
            std::swap(a(k, j), a(piv, j));
            std::swap(inv(k, j), inv(piv, j));
        }
        const double d = a(k, k);
        for (std::size_t j = 0; j < n; ++j) {
            a(k, j) /= d;
            inv(k, j) /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k) continue;
            const double f = a(i, k);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(k, j);
                inv(i, j) -= f * inv(k, j);
            }
        }
    }
    return inv;
}

inline Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Largest |eigenvalue| via power iteration on A^2 (tolerance 1e-10, at most
// 10000 iterations); A^2 has a unique dominant eigenvalue even when A has
// +/- pairs.
inline double power_spectral_norm(const Matrix& a, std::uint64_t seed = 3) {
    const std::size_t n = a.rows();
    const Matrix a2 = naive_product(a, a);
    kronprec::NormalStream z(seed);
    std::vector<double> v(n), w(n);
    for (double& x : v) x = z.next();
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : v) x /= norm;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a2(i, j) * v[j];
            w[i] = s;
        }
        double next = 0.0;
        for (std::size_t i = 0; i < n; ++i) next += v[i] * w[i];
        v = w;
        if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

// Objective as a single quadratic form in vec(Y): tr(Y G Y^T O) = vec(Y)^T (G kron O) vec(Y).
inline double objective(const kronprec::Dataset& d, const Matrix& omega, const Matrix& gamma,
                        double lambda1, double lambda2) {
    const Matrix k = kronprec::kron(gamma, omega);
    double quad = 0.0;
    for (const Matrix& y : d.samples) {
        const Matrix v = kronprec::vec(y);
        for (std::size_t i = 0; i < k.rows(); ++i)
            for (std::size_t j = 0; j < k.cols(); ++j) quad += v(i, 0) * k(i, j) * v(j, 0);
    }
    const double p = static_cast<double>(d.p);
    const double q = static_cast<double>(d.q);
    double pen1 = 0.0, pen2 = 0.0;
    for (std::size_t i = 0; i < d.p; ++i)
        for (std::size_t j = 0; j < d.p; ++j)
            if (i != j) pen1 += std::abs(omega(i, j));
    for (std::size_t i = 0; i < d.q; ++i)
        for (std::size_t j = 0; j < d.q; ++j)
            if (i != j) pen2 += std::abs(gamma(i, j));
    return quad / (static_cast<double>(d.n) * p * q) - lu_log_det(omega) / p -
           lu_log_det(gamma) / q + lambda1 * pen1 + lambda2 * pen2;
}

// (1/p) * integral_0^1 (1 - w) vec(D)^T (Ow^-1 kron Ow^-1) vec(D) dw with
// Ow = O0 + w D, composite Simpson on `intervals` (even) panels.
inline double t4_integral(const Matrix& omega0, const Matrix& delta, int intervals = 200) {
    const double p = static_cast<double>(omega0.rows());
    auto integrand = [&](double w) {
        const Matrix ow = omega0 + delta * w;
        const Matrix inv = gauss_jordan_inverse(ow);
        const Matrix k = kronprec::kron(inv, inv);
        const Matrix v = kronprec::vec(delta);
        double s = 0.0;
        for (std::size_t i = 0; i < k.rows(); ++i)
            for (std::size_t j = 0; j < k.cols(); ++j) s += v(i, 0) * k(i, j) * v(j, 0);
        return (1.0 - w) * s;
    };
    const double h = 1.0 / intervals;
    double sum = integrand(0.0) + integrand(1.0);
    for (int i = 1; i < intervals; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
    return sum * h / 3.0 / p;
}

inline double glasso_objective(const Matrix& a, double rho, const Matrix& theta) {
    const double ld = lu_log_det(theta);
    if (!std::isfinite(ld)) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < theta.rows(); ++i) {
        // Leading principal minors positive <=> definite (Sylvester).
        Matrix lead(i + 1, i + 1);
        for (std::size_t r = 0; r <= i; ++r)
            for (std::size_t c = 0; c <= i; ++c) lead(r, c) = theta(r, c);
        const double m = lu_log_det(lead);
        if (!std::isfinite(m)) return std::numeric_limits<double>::infinity();
    }
    double tr = 0.0, pen = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            tr += a(i, j) * theta(j, i);
            if (i != j) pen += std::abs(theta(i, j));
        }
    return tr - ld + rho * pen;
}

// Compass search over the upper-triangular parameters of Theta. Each step
// tries +/- step along every coordinate (an off-diagonal coordinate moves
// both symmetric entries) plus, to get off the l1 kinks, along each
// coordinate with the opposite-sign move on the diagonal pair. The objective
// is convex, smooth plus separable l1, so coordinate moves suffice to reach
// the minimum; the extra directions only speed things up.
inline double direct_search_glasso(const Matrix& a, double rho, Matrix* best_theta = nullptr) {
    const std::size_t d = a.rows();
    Matrix theta(d, d);
    for (std::size_t i = 0; i < d; ++i) theta(i, i) = 1.0 / a(i, i);
    double best = glasso_objective(a, rho, theta);
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) coords.emplace_back(i, j);
    double step = 0.5;
    while (step > 1e-11) {
        bool improved = false;
        for (const auto& [i, j] : coords) {
            for (double sgn : {1.0, -1.0}) {
                Matrix trial = theta;
                trial(i, j) += sgn * step;
                if (i != j) trial(j, i) = trial(i, j);
                const double v = glasso_objective(a, rho, trial);
                if (v < best) {
                    best = v;
                    theta = trial;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    if (best_theta) *best_theta = theta;
    return best;
}

inline Matrix random_symmetric(std::size_t d, kronprec::NormalStream& z) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = z.next();
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

// B^T B / d + shift * I with B standard normal.
inline Matrix random_spd(std::size_t d, kronprec::NormalStream& z, double shift = 0.5) {
    Matrix b(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) b(i, j) = z.next();
    Matrix m = naive_product(b.transposed(), b) * (1.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) m(i, i) += shift;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) m(j, i) = m(i, j);
    return m;
}

inline double max_abs(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

}  // namespace oracle
