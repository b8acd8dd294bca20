#include "kronprec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace kronprec {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw Error(ErrorKind::ShapeMismatch, "ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

double Matrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* context) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::ShapeMismatch,
                    std::string(context) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
    }
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "multiply: inner dimensions differ");
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "multiply_transposed: inner dimensions differ");
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto bj = b.row(j);
            c(i, j) = std::inner_product(ai.begin(), ai.end(), bj.begin(), 0.0);
        }
    }
    return c;
}

Matrix transposed_multiply(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "transposed_multiply: inner dimensions differ");
    }
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    }
    return c;
}

double trace_of_product(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows() || a.rows() != b.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "trace_of_product");
    }
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) t += a(i, k) * b(k, i);
    return t;
}

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
    if (!m_.is_square()) {
        throw Error(ErrorKind::ShapeMismatch, "SymMatrix requires a square matrix");
    }
    const std::size_t n = m_.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(m_(i, i))) {
            throw Error(ErrorKind::InvalidArgument, "SymMatrix entries must be finite");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = m_(i, j);
            const double b = m_(j, i);
            if (!std::isfinite(a) || !std::isfinite(b)) {
                throw Error(ErrorKind::InvalidArgument, "SymMatrix entries must be finite");
            }
            if (std::abs(a - b) > kSymmetryTolerance * std::max(1.0, std::abs(a))) {
                throw Error(ErrorKind::InvalidArgument,
                            "matrix is not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
            }
            const double mid = 0.5 * (a + b);
            m_(i, j) = mid;
            m_(j, i) = mid;
        }
    }
}

Matrix cholesky(const Matrix& m) {
    if (!m.is_square()) throw Error(ErrorKind::ShapeMismatch, "cholesky requires a square matrix");
    const std::size_t n = m.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) {
            throw Error(ErrorKind::NotPositiveDefinite,
                        "non-positive pivot at index " + std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

SpdMatrix::SpdMatrix(SymMatrix s) : s_(std::move(s)), chol_(cholesky(s_.matrix())) {}

double log_det(const SpdMatrix& m) {
    const Matrix& l = m.cholesky_factor();
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

Matrix solve(const SpdMatrix& m, const Matrix& b) {
    const Matrix& l = m.cholesky_factor();
    const std::size_t n = l.rows();
    if (b.rows() != n) throw Error(ErrorKind::ShapeMismatch, "solve: row count differs");
    Matrix x = b;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

SpdMatrix inverse(const SpdMatrix& m) {
    const Matrix& l = m.cholesky_factor();
    const std::size_t n = l.rows();
    // L^{-1}, then inv = L^{-T} L^{-1}; filling only the upper triangle keeps
    // the result exactly symmetric.
    Matrix linv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        linv(j, j) = 1.0 / l(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = j; k < i; ++k) s -= l(i, k) * linv(k, j);
            linv(i, j) = s / l(i, i);
        }
    }
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = j; k < n; ++k) s += linv(k, i) * linv(k, j);
            inv(i, j) = s;
            inv(j, i) = s;
        }
    }
    return SpdMatrix(SymMatrix(std::move(inv)));
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Cyclic Jacobi on a working copy; accumulates rotations into v when given.
std::vector<double> jacobi(Matrix a, Matrix* v, int max_sweeps) {
    const std::size_t n = a.rows();
    const double threshold = 1e-12 * frobenius_norm(a);
    int sweep = 0;
    while (off_diagonal_norm(a) > threshold) {
        if (sweep++ >= max_sweeps) {
            throw Error(ErrorKind::NoConvergence,
                        "Jacobi eigen solver exceeded " + std::to_string(max_sweeps) + " sweeps");
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                if (v != nullptr) {
                    Matrix& vm = *v;
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = vm(k, p);
                        const double vkq = vm(k, q);
                        vm(k, p) = c * vkp - s * vkq;
                        vm(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
    return d;
}

}  // namespace

EigenDecomposition sym_eigen(const SymMatrix& m, int max_sweeps) {
    const std::size_t n = m.dim();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "sym_eigen requires dim >= 1");
    Matrix v = Matrix::identity(n);
    const std::vector<double> d = jacobi(m.matrix(), &v, max_sweeps);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = d[order[k]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

namespace {

// Householder reduction to tridiagonal form (diagonal d, subdiagonal e[1..n-1]).
void tridiagonalize(Matrix a, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = a.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    std::vector<double> v(n), w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        if (a(k + 1, k) > 0.0) alpha = -alpha;
        // v = x - alpha e1, H = I - 2 v v^T / (v^T v)
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = a(i, k);
            if (i == k + 1) v[i] -= alpha;
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // w = beta A v ; K = beta/2 v^T w ; w -= K v ; A -= v w^T + w v^T
        double vw = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
            w[i] = beta * s;
            vw += v[i] * w[i];
        }
        const double kk = 0.5 * beta * vw;
        for (std::size_t i = k + 1; i < n; ++i) w[i] -= kk * v[i];
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j <= i; ++j) {
                a(i, j) -= v[i] * w[j] + w[i] * v[j];
                a(j, i) = a(i, j);
            }
        a(k + 1, k) = alpha;
        a(k, k + 1) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
            a(k, i) = 0.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
    for (std::size_t i = 1; i < n; ++i) e[i] = a(i, i - 1);
}

// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    if (n > 0) e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (iter++ >= 60) {
                    throw Error(ErrorKind::NoConvergence, "tridiagonal QL failed to converge");
                }
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                std::size_t i = m;
                bool underflow = false;
                while (i-- > l) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace

std::vector<double> sym_eigenvalues(const SymMatrix& m) {
    if (m.dim() == 0) throw Error(ErrorKind::InvalidArgument, "sym_eigen requires dim >= 1");
    std::vector<double> d, e;
    tridiagonalize(m.matrix(), d, e);
    tridiagonal_ql(d, e);
    std::sort(d.begin(), d.end());
    return d;
}

double spectral_norm(const SymMatrix& m) {
    const std::vector<double> d = sym_eigenvalues(m);
    return std::max(std::abs(d.front()), std::abs(d.back()));
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return std::sqrt(s);
}

double max_abs_entry_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_entry_diff");
    double best = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) best = std::max(best, std::abs(av[k] - bv[k]));
    return best;
}

Matrix kron(const Matrix& a, const Matrix& b, std::size_t cap) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    if (rows != 0 && cols > cap / rows) {
        throw Error(ErrorKind::DimensionCap,
                    "Kronecker product of size " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " exceeds cap of " + std::to_string(cap) +
                        " entries");
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return out;
}

Matrix vec(const Matrix& m) {
    Matrix v(m.rows() * m.cols(), 1);
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) v(j * m.rows() + i, 0) = m(i, j);
    return v;
}

}  // namespace kronprec
