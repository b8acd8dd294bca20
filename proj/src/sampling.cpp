#include "kronprec/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kronprec/rng.hpp"

namespace kronprec {

std::string describe(const Design& design) {
    std::ostringstream os;
    os.precision(17);
    if (const auto* b = std::get_if<BandedDesign>(&design)) {
        os << "banded(" << b->bandwidth << "," << b->strength << ")";
    } else {
        const auto& r = std::get<RandomSupportDesign>(design);
        os << "random_support(" << r.s1 << "," << r.s2 << "," << r.strength << ")";
    }
    return os.str();
}

namespace {

Matrix banded_precision(std::size_t dim, const BandedDesign& d) {
    Matrix r = Matrix::identity(dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim && j - i <= d.bandwidth; ++j) {
            r(i, j) = -d.strength;
            r(j, i) = -d.strength;
        }
    return r;
}

Matrix random_precision(std::size_t dim, std::size_t nonzeros, double strength,
                        Xoshiro256& rng) {
    std::vector<IndexPair> pairs;
    pairs.reserve(dim * (dim - 1) / 2);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim; ++j) pairs.emplace_back(i, j);
    const std::size_t picks = nonzeros / 2;
    // Partial Fisher-Yates: the first `picks` slots become a uniform sample.
    for (std::size_t k = 0; k < picks; ++k) {
        const std::size_t remaining = pairs.size() - k;
        const std::size_t offset = static_cast<std::size_t>(rng.uniform() * remaining);
        std::swap(pairs[k], pairs[k + std::min(offset, remaining - 1)]);
    }
    Matrix r = Matrix::identity(dim);
    for (std::size_t k = 0; k < picks; ++k) {
        const auto [i, j] = pairs[k];
        r(i, j) = -strength;
        r(j, i) = -strength;
    }
    return r;
}

struct Corridor {
    double lo;
    double hi;
};

Corridor precision_corridor(double tau1) {
    const double margin = kCorridorMarginFraction * (1.0 / tau1 - tau1);
    return {tau1 + margin, 1.0 / tau1 - margin};
}

// Diagonal shift placing the spectrum inside the corridor. Within the feasible
// shifts, the one giving tr((R + shift I)^{-1}) == dim is preferred.
double corridor_shift(const std::vector<double>& eig, const Corridor& c) {
    const double lo = eig.front();
    const double hi = eig.back();
    if (hi - lo >= c.hi - c.lo) {
        throw Error(ErrorKind::InfeasibleDesign,
                    "precision eigenvalue spread exceeds the corridor for the given tau1");
    }
    const double dim = static_cast<double>(eig.size());
    auto excess_trace = [&](double shift) {
        double t = 0.0;
        for (double v : eig) t += 1.0 / (v + shift);
        return t - dim;
    };
    double left = c.lo - lo;
    double right = c.hi - hi;
    if (excess_trace(left) <= 0.0) return left;
    if (excess_trace(right) >= 0.0) return right;
    for (int it = 0; it < 200 && right - left > 1e-15 * std::max(1.0, std::abs(left)); ++it) {
        const double mid = 0.5 * (left + right);
        (excess_trace(mid) > 0.0 ? left : right) = mid;
    }
    return 0.5 * (left + right);
}

std::vector<IndexPair> support_of(const Matrix& m, std::size_t& off_diagonal) {
    std::vector<IndexPair> s;
    off_diagonal = 0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) {
                s.emplace_back(i, j);
                if (i != j) ++off_diagonal;
            }
    return s;
}

void require_in_corridor(const std::vector<double>& eig, double tau1, const char* what) {
    if (!(eig.front() > tau1) || !(eig.back() < 1.0 / tau1)) {
        throw Error(ErrorKind::InfeasibleDesign,
                    std::string(what) + " eigenvalues leave (tau1, 1/tau1)");
    }
}

}  // namespace

TrueModel make_true_model(std::size_t p, std::size_t q, const Design& design, double tau1,
                          std::uint64_t seed) {
    if (p == 0 || q == 0) throw Error(ErrorKind::InvalidArgument, "p and q must be positive");
    if (!(tau1 > 0.0 && tau1 < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "tau1 must lie in (0, 1)");
    }

    Matrix raw_omega;
    Matrix raw_gamma;
    if (const auto* b = std::get_if<BandedDesign>(&design)) {
        if (b->bandwidth >= std::min(p, q)) {
            throw Error(ErrorKind::InvalidArgument, "bandwidth must be below min(p, q)");
        }
        if (!std::isfinite(b->strength)) throw Error(ErrorKind::InvalidArgument, "strength");
        raw_omega = banded_precision(p, *b);
        raw_gamma = banded_precision(q, *b);
    } else {
        const auto& r = std::get<RandomSupportDesign>(design);
        if (r.s1 > p * (p - 1) || r.s2 > q * (q - 1) || r.s1 % 2 != 0 || r.s2 % 2 != 0) {
            throw Error(ErrorKind::InvalidArgument,
                        "s1, s2 must be even and at most p(p-1), q(q-1)");
        }
        if (!std::isfinite(r.strength)) throw Error(ErrorKind::InvalidArgument, "strength");
        Xoshiro256 rng(derive_seed(seed, {1}));
        raw_omega = random_precision(p, r.s1, r.strength, rng);
        raw_gamma = random_precision(q, r.s2, r.strength, rng);
    }

    const Corridor corridor = precision_corridor(tau1);

    TrueModel m;
    m.p = p;
    m.q = q;
    m.tau1 = tau1;

    // Rows: shift, invert.
    {
        const std::vector<double> eig = sym_eigenvalues(SymMatrix(raw_omega));
        const double shift = corridor_shift(eig, corridor);
        for (std::size_t i = 0; i < p; ++i) raw_omega(i, i) += shift;
        m.omega0 = SpdMatrix(raw_omega);
        m.sigma0 = inverse(m.omega0);
        std::vector<double> cov_eig;
        for (double v : eig) cov_eig.push_back(1.0 / (v + shift));
        std::sort(cov_eig.begin(), cov_eig.end());
        require_in_corridor(cov_eig, tau1, "Sigma0");
    }
    // Columns: shift, invert, then rescale so tr(Psi0) = q.
    {
        const std::vector<double> eig = sym_eigenvalues(SymMatrix(raw_gamma));
        const double shift = corridor_shift(eig, corridor);
        for (std::size_t i = 0; i < q; ++i) raw_gamma(i, i) += shift;
        const SpdMatrix psi_raw = inverse(SpdMatrix(raw_gamma));
        const double scale = static_cast<double>(q) / psi_raw.matrix().trace();
        m.psi0 = SpdMatrix(psi_raw.matrix() * scale);
        m.gamma0 = SpdMatrix(raw_gamma * (1.0 / scale));
        std::vector<double> cov_eig;
        for (double v : eig) cov_eig.push_back(scale / (v + shift));
        std::sort(cov_eig.begin(), cov_eig.end());
        require_in_corridor(cov_eig, tau1, "Psi0");
    }

    m.support1 = support_of(m.omega0, m.s1);
    m.support2 = support_of(m.gamma0, m.s2);

    std::ostringstream id;
    id.precision(17);
    id << describe(design) << "/p=" << p << "/q=" << q << "/tau1=" << tau1 << "/seed=" << seed;
    m.id = id.str();
    return m;
}

TrueModel identity_model(std::size_t p, std::size_t q) {
    return model_from_covariances(SpdMatrix::identity(p), SpdMatrix::identity(q), 0.5);
}

TrueModel model_from_covariances(const SpdMatrix& sigma0, const SpdMatrix& psi0, double tau1) {
    TrueModel m;
    m.p = sigma0.dim();
    m.q = psi0.dim();
    m.tau1 = tau1;
    const double scale = static_cast<double>(m.q) / psi0.matrix().trace();
    m.sigma0 = sigma0;
    m.psi0 = scale == 1.0 ? psi0 : SpdMatrix(psi0.matrix() * scale);
    m.omega0 = inverse(m.sigma0);
    m.gamma0 = inverse(m.psi0);
    require_in_corridor(sym_eigenvalues(m.sigma0), tau1, "Sigma0");
    require_in_corridor(sym_eigenvalues(m.psi0), tau1, "Psi0");
    m.support1 = support_of(m.omega0, m.s1);
    m.support2 = support_of(m.gamma0, m.s2);
    m.id = "explicit/p=" + std::to_string(m.p) + "/q=" + std::to_string(m.q);
    return m;
}

Dataset make_dataset(std::vector<Matrix> samples, std::uint64_t seed) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "dataset needs n >= 1");
    Dataset d;
    d.n = samples.size();
    d.p = samples.front().rows();
    d.q = samples.front().cols();
    if (d.p == 0 || d.q == 0) throw Error(ErrorKind::InvalidArgument, "empty sample matrix");
    for (const Matrix& y : samples) {
        require_same_shape(y, samples.front(), "make_dataset");
        for (double v : y.values())
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite sample");
    }
    d.samples = std::move(samples);
    d.seed = seed;
    return d;
}

Dataset sample_matrix_normal(const TrueModel& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
    NormalStream normal(seed);
    const Matrix& l_sigma = model.sigma0.cholesky_factor();
    const Matrix& l_psi = model.psi0.cholesky_factor();
    Dataset d;
    d.n = n;
    d.p = model.p;
    d.q = model.q;
    d.seed = seed;
    d.samples.reserve(n);
    Matrix z(model.p, model.q);
    for (std::size_t s = 0; s < n; ++s) {
        for (double& v : z.values()) v = normal.next();
        d.samples.push_back(multiply(l_sigma, multiply_transposed(z, l_psi)));
    }
    return d;
}

}  // namespace kronprec
