#pragma once

// Dense linear algebra for small symmetric problems: row-major matrices,
// validated symmetric / positive-definite wrappers, Cholesky, Jacobi
// eigendecomposition, norms and Kronecker utilities.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "kronprec/error.hpp"

namespace kronprec {

/// Dense row-major real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double trace() const;
    Matrix transposed() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

Matrix multiply(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix multiply_transposed(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix transposed_multiply(const Matrix& a, const Matrix& b);

/// tr(a * b) without forming the product.
double trace_of_product(const Matrix& a, const Matrix& b);

/// Tolerance of the symmetry invariant: |a_ij - a_ji| <= tol * max(1, |a_ij|).
inline constexpr double kSymmetryTolerance = 1e-12;

/// Symmetric matrix. Construction symmetrizes inputs whose asymmetry is
/// within kSymmetryTolerance and rejects anything else.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Matrix m);
    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SymMatrix(Matrix(rows)) {}

    static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }
    static SymMatrix zeros(std::size_t n) { return SymMatrix(Matrix(n, n)); }

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }
    operator const Matrix&() const noexcept { return m_; }

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    Matrix m_;
};

/// Symmetric positive-definite matrix with its lower Cholesky factor.
class SpdMatrix {
public:
    SpdMatrix() = default;
    /// Throws Error(NotPositiveDefinite) when the factorization has a pivot <= 0.
    explicit SpdMatrix(SymMatrix s);
    explicit SpdMatrix(Matrix m) : SpdMatrix(SymMatrix(std::move(m))) {}
    SpdMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SpdMatrix(Matrix(rows)) {}

    static SpdMatrix identity(std::size_t n) { return SpdMatrix(Matrix::identity(n)); }

    std::size_t dim() const noexcept { return s_.dim(); }
    double operator()(std::size_t i, std::size_t j) const { return s_(i, j); }
    const SymMatrix& sym() const noexcept { return s_; }
    const Matrix& matrix() const noexcept { return s_.matrix(); }
    operator const Matrix&() const noexcept { return s_.matrix(); }
    operator const SymMatrix&() const noexcept { return s_; }
    const Matrix& cholesky_factor() const noexcept { return chol_; }

private:
    SymMatrix s_;
    Matrix chol_;
};

/// Lower-triangular L with L L^T = m. Throws NotPositiveDefinite on a
/// non-positive pivot; only the lower triangle of m is read.
Matrix cholesky(const Matrix& m);
inline const Matrix& cholesky(const SpdMatrix& m) { return m.cholesky_factor(); }

double log_det(const SpdMatrix& m);
SpdMatrix inverse(const SpdMatrix& m);
/// Solves m X = b through the cached Cholesky factor.
Matrix solve(const SpdMatrix& m, const Matrix& b);

struct EigenDecomposition {
    std::vector<double> values;  // ascending
    Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition. Throws NoConvergence when the sweep
/// budget is exhausted.
EigenDecomposition sym_eigen(const SymMatrix& m, int max_sweeps = 100);
std::vector<double> sym_eigenvalues(const SymMatrix& m);

double spectral_norm(const SymMatrix& m);
double frobenius_norm(const Matrix& m);
double max_abs_entry_diff(const Matrix& a, const Matrix& b);

/// Default element cap for kron(): 4096 x 4096 entries.
inline constexpr std::size_t kDefaultKronCap = std::size_t{4096} * 4096;

/// Kronecker product. Throws DimensionCap if the result would have more than
/// `cap` entries.
Matrix kron(const Matrix& a, const Matrix& b, std::size_t cap = kDefaultKronCap);

/// Column-stacking vectorization, returned as an (rows*cols) x 1 matrix.
Matrix vec(const Matrix& m);

/// Throws ShapeMismatch unless a and b have identical shapes.
void require_same_shape(const Matrix& a, const Matrix& b, const char* context);

}  // namespace kronprec
