#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kronprec/linalg.hpp"

namespace kronprec {

/// Precision matrices with entries -strength on every off-diagonal within
/// `bandwidth` of the diagonal (bandwidth 1 gives AR(1)-type covariances).
struct BandedDesign {
    std::size_t bandwidth = 1;
    double strength = 0.3;
};

/// Precision matrices with s1 (resp. s2) off-diagonal nonzeros, placed on
/// uniformly drawn symmetric pairs, each equal to -strength.
struct RandomSupportDesign {
    std::size_t s1 = 0;
    std::size_t s2 = 0;
    double strength = 0.3;
};

using Design = std::variant<BandedDesign, RandomSupportDesign>;

std::string describe(const Design& design);

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Ground truth (Sigma0, Psi0) with their inverses (Omega0, Gamma0).
/// tr(psi0) == q; all covariance eigenvalues lie in (tau1, 1/tau1).
struct TrueModel {
    std::size_t p = 0;
    std::size_t q = 0;
    SpdMatrix sigma0;
    SpdMatrix psi0;
    SpdMatrix omega0;
    SpdMatrix gamma0;
    std::size_t s1 = 0;  // off-diagonal nonzeros of omega0
    std::size_t s2 = 0;  // off-diagonal nonzeros of gamma0
    std::vector<IndexPair> support1;  // all nonzero (i, j) of omega0, diagonal included
    std::vector<IndexPair> support2;
    double tau1 = 0.0;
    std::string id;
};

/// Builds a model: raw precision from the design, diagonal shift into the
/// eigenvalue corridor, inversion, then tr(Psi0) = q normalization.
/// Throws InvalidArgument for malformed designs and InfeasibleDesign when the
/// corridor cannot be met.
TrueModel make_true_model(std::size_t p, std::size_t q, const Design& design, double tau1,
                          std::uint64_t seed);

/// Model with Sigma0 = I_p and Psi0 = I_q.
TrueModel identity_model(std::size_t p, std::size_t q);

/// Model from explicit covariances; Psi0 is rescaled to trace q.
TrueModel model_from_covariances(const SpdMatrix& sigma0, const SpdMatrix& psi0, double tau1);

/// Lower bound of the precision eigenvalue corridor margin as a fraction of
/// (1/tau1 - tau1).
inline constexpr double kCorridorMarginFraction = 0.05;

struct Dataset {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t q = 0;
    std::vector<Matrix> samples;
    std::uint64_t seed = 0;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Wraps explicit samples, validating shapes and finiteness.
Dataset make_dataset(std::vector<Matrix> samples, std::uint64_t seed = 0);

/// Y_i = L_Sigma Z_i L_Psi^T with Z_i filled row-major from the normal stream.
Dataset sample_matrix_normal(const TrueModel& model, std::size_t n, std::uint64_t seed);

// Text serialization:
//   kronprec-dataset <major>
//   n,p,q,seed
//   <n>,<p>,<q>,<seed>
//   n*p rows of q comma-separated values (sample 0 rows first), %.17g
inline constexpr int kDatasetSchemaMajor = 1;

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace kronprec
