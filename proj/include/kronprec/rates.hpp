#pragma once

// Monte-Carlo rate harness: replicate fits on simulated data, error lists
// scaled like the theoretical rates, predictors, and log-log slope fits.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kronprec/sampling.hpp"
#include "kronprec/smgm.hpp"

namespace kronprec {

/// Ground-truth description; no design means Sigma0 = I, Psi0 = I.
struct ModelSpec {
    std::size_t p = 2;
    std::size_t q = 2;
    std::optional<Design> design;
    double tau1 = 0.5;
    std::uint64_t model_seed = 1;
};

/// Throws ConfigError when the design cannot be realized.
TrueModel build_model(const ModelSpec& spec);

struct EstimatorSet {
    bool smgm = false;
    bool heuristic = false;            // spectral errors of Sigma_H, Psi_H
    bool heuristic_precision = false;  // spectral errors of their inverses
};

/// Parses names "smgm", "heuristic", "heuristic_precision"; ConfigError otherwise.
EstimatorSet parse_estimators(std::span<const std::string> names);
std::vector<std::string> estimator_names(const EstimatorSet& set);

struct RatePredictors {
    double smgm_omega = 0.0;  // (1 + s1/p) log p / (nq)
    double smgm_gamma = 0.0;  // (1 + s2/q) log q / (np)
    double heur_sigma = 0.0;  // sqrt(max(p, log n) / (nq))
    double heur_psi = 0.0;    // sqrt(max(max(p, log n)/(nq), max(q, log n)/(np)))
    friend bool operator==(const RatePredictors&, const RatePredictors&) = default;
};

/// Throws DomainError unless n, p, q >= 2.
RatePredictors rate_predictors(double n, double p, double q, double s1, double s2);

struct RateCell {
    std::size_t n = 0, p = 0, q = 0, s1 = 0, s2 = 0;
    double lambda1 = 0.0, lambda2 = 0.0;
    std::size_t replicates = 0;
    std::vector<std::uint64_t> seeds;         // one per replicate
    std::vector<std::size_t> replicate_index; // successful replicates, ascending

    // ||.||_F^2 / p and ||.||_F^2 / q against the truth, no rescaling.
    std::vector<double> errors_smgm_omega;
    std::vector<double> errors_smgm_gamma;
    // Same after the best scalar multiple c minimizing ||c est - truth||_F.
    std::vector<double> aligned_smgm_omega;
    std::vector<double> aligned_smgm_gamma;
    // Spectral-norm errors.
    std::vector<double> errors_heur_sigma;
    std::vector<double> errors_heur_psi;
    std::vector<double> errors_heur_omega;
    std::vector<double> errors_heur_gamma;

    std::optional<RatePredictors> predictors;  // absent when n, p or q < 2
    std::size_t failed_replicates = 0;
    std::vector<std::pair<std::size_t, std::string>> failures;  // (replicate, reason)

    friend bool operator==(const RateCell&, const RateCell&) = default;
};

struct CellOptions {
    SmgmOptions smgm;
    std::size_t workers = 0;  // 0: KRONPREC_WORKERS or hardware concurrency
};

/// Worker count used when none is configured.
std::size_t default_worker_count();

/// Runs `replicates` independent datasets, seed derive_seed(base_seed, {n, p, q, r}).
/// Numerical failures and non-converged fits are counted, not thrown.
RateCell run_cell(const ModelSpec& spec, std::size_t n, const PenaltyConfig& penalty,
                  std::size_t replicates, const EstimatorSet& estimators,
                  std::uint64_t base_seed, const CellOptions& options = {});

/// Same, with an already built model.
RateCell run_cell(const TrueModel& model, std::size_t n, const PenaltyConfig& penalty,
                  std::size_t replicates, const EstimatorSet& estimators,
                  std::uint64_t base_seed, const CellOptions& options = {});

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// OLS of log(values) on log(axis). Needs >= 3 points, a strictly monotone
/// axis and positive values; InsufficientData otherwise.
SlopeFit fit_rate_slope(std::span<const double> axis, std::span<const double> values);

/// Fit on exact c/n data for n in {100, 200, 400}.
SlopeFit synthetic_slope_selftest(double c = 3.0);

// Metric names used in reports: smgm_omega, smgm_gamma, smgm_omega_aligned,
// smgm_gamma_aligned, heur_sigma, heur_psi, heur_omega, heur_gamma.
std::vector<std::string> metric_names();
const std::vector<double>& metric_errors(const RateCell& cell, const std::string& metric);
/// The predictor a metric is compared with.
double metric_predictor(const RatePredictors& pred, const std::string& metric);

struct CellSummary {
    std::string metric;
    double mean = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};
std::vector<CellSummary> summarize_cell(const RateCell& cell);

double median(std::vector<double> values);
double percentile(std::vector<double> values, double fraction);

enum class Axis { N, P, Q };
std::string to_string(Axis axis);

struct SlopeFitEntry {
    std::string metric;
    Axis axis = Axis::N;
    std::vector<std::size_t> cells;   // indices of the cells used, axis ascending
    std::optional<SlopeFit> fit;      // absent when fewer than 3 usable cells
    std::optional<double> predicted_slope;
    std::optional<bool> verdict;
    std::string note;
};

struct RatioEntry {
    std::string metric;
    Axis axis = Axis::N;
    std::vector<std::size_t> cells;
    std::vector<double> ratios;            // median(cell k+1) / median(cell k)
    std::vector<double> predicted_ratios;  // predictor(cell k+1) / predictor(cell k)
    bool verdict = false;
};

struct ReportOptions {
    double min_success_fraction = 0.8;
    double slope_tolerance = 0.35;
    double min_r_squared = 0.9;
    double ratio_low = 0.8;    // multiples of the predicted ratio
    double ratio_high = 1.25;
};

struct RateReport {
    std::vector<RateCell> cells;
    std::vector<SlopeFitEntry> slope_fits;
    std::vector<RatioEntry> ratio_checks;
    ReportOptions options;
};

/// Groups cells sharing two of (n, p, q) and varying the third over >= 2
/// values; slopes need >= 3 usable cells, ratio checks >= 2.
RateReport build_rate_report(std::vector<RateCell> cells, const ReportOptions& options = {});

}  // namespace kronprec
