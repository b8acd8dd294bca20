#include "kronprec/rates.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

#include "kronprec/heuristic.hpp"
#include "kronprec/rng.hpp"

namespace kronprec {

TrueModel build_model(const ModelSpec& spec) {
    try {
        if (!spec.design) return identity_model(spec.p, spec.q);
        return make_true_model(spec.p, spec.q, *spec.design, spec.tau1, spec.model_seed);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InfeasibleDesign || e.kind() == ErrorKind::InvalidArgument) {
            throw Error(ErrorKind::ConfigError, std::string("model spec: ") + e.what());
        }
        throw;
    }
}

EstimatorSet parse_estimators(std::span<const std::string> names) {
    EstimatorSet set;
    for (const std::string& name : names) {
        if (name == "smgm") {
            set.smgm = true;
        } else if (name == "heuristic") {
            set.heuristic = true;
        } else if (name == "heuristic_precision") {
            set.heuristic_precision = true;
        } else {
            throw Error(ErrorKind::ConfigError, "unknown estimator '" + name + "'");
        }
    }
    if (!set.smgm && !set.heuristic && !set.heuristic_precision) {
        throw Error(ErrorKind::ConfigError, "no estimator requested");
    }
    return set;
}

std::vector<std::string> estimator_names(const EstimatorSet& set) {
    std::vector<std::string> out;
    if (set.smgm) out.push_back("smgm");
    if (set.heuristic) out.push_back("heuristic");
    if (set.heuristic_precision) out.push_back("heuristic_precision");
    return out;
}

RatePredictors rate_predictors(double n, double p, double q, double s1, double s2) {
    if (!(n >= 2.0) || !(p >= 2.0) || !(q >= 2.0) || !(s1 >= 0.0) || !(s2 >= 0.0)) {
        throw Error(ErrorKind::DomainError, "rate predictors need n, p, q >= 2 and s >= 0");
    }
    const double logn = std::log(n);
    RatePredictors r;
    r.smgm_omega = (1.0 + s1 / p) * std::log(p) / (n * q);
    r.smgm_gamma = (1.0 + s2 / q) * std::log(q) / (n * p);
    const double row = std::max(p, logn) / (n * q);
    const double col = std::max(q, logn) / (n * p);
    r.heur_sigma = std::sqrt(row);
    r.heur_psi = std::sqrt(std::max(row, col));
    return r;
}

std::size_t default_worker_count() {
    if (const char* env = std::getenv("KRONPREC_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

namespace {

struct ReplicateResult {
    bool ok = false;
    std::string reason;
    double smgm_omega = 0.0, smgm_gamma = 0.0, aligned_omega = 0.0, aligned_gamma = 0.0;
    double heur_sigma = 0.0, heur_psi = 0.0, heur_omega = 0.0, heur_gamma = 0.0;
    std::exception_ptr fatal;
};

double scaled_sq_frobenius(const Matrix& est, const Matrix& truth) {
    const double f = frobenius_norm(est - truth);
    return f * f / static_cast<double>(truth.rows());
}

double aligned_sq_frobenius(const Matrix& est, const Matrix& truth) {
    const double ee = trace_of_product(est, est);
    const double c = ee > 0.0 ? trace_of_product(est, truth) / ee : 1.0;
    return scaled_sq_frobenius(est * c, truth);
}

double spectral_error(const Matrix& est, const Matrix& truth) {
    return spectral_norm(SymMatrix(est - truth));
}

ReplicateResult run_replicate(const TrueModel& model, std::size_t n, const PenaltyConfig& penalty,
                              const EstimatorSet& est, std::uint64_t seed,
                              const SmgmOptions& smgm_options) {
    ReplicateResult r;
    try {
        const Dataset data = sample_matrix_normal(model, n, seed);
        if (est.smgm) {
            const FitResult fit = smgm_fit(data, penalty, smgm_options);
            if (!fit.converged) {
                r.reason = fit.scale_unbounded
                               ? "smgm: no convergence (one factor diagonal, scale drifts)"
                               : "smgm: no convergence";
                return r;
            }
            r.smgm_omega = scaled_sq_frobenius(fit.omega_hat, model.omega0);
            r.smgm_gamma = scaled_sq_frobenius(fit.gamma_hat, model.gamma0);
            r.aligned_omega = aligned_sq_frobenius(fit.omega_hat, model.omega0);
            r.aligned_gamma = aligned_sq_frobenius(fit.gamma_hat, model.gamma0);
        }
        if (est.heuristic || est.heuristic_precision) {
            HeuristicEstimates h = heuristic_psi(data);
            if (est.heuristic) {
                r.heur_sigma = spectral_error(h.sigma_hat, model.sigma0);
                r.heur_psi = spectral_error(h.psi_hat, model.psi0);
            }
            if (est.heuristic_precision) {
                h = heuristic_inverses(std::move(h));
                r.heur_omega = spectral_error(*h.omega_hat, model.omega0);
                r.heur_gamma = spectral_error(*h.gamma_hat, model.gamma0);
            }
        }
        r.ok = true;
    } catch (const Error& e) {
        if (!e.is_numerical()) {
            r.fatal = std::current_exception();
            return r;
        }
        r.reason = e.what();
    } catch (...) {
        r.fatal = std::current_exception();
    }
    return r;
}

}  // namespace

RateCell run_cell(const ModelSpec& spec, std::size_t n, const PenaltyConfig& penalty,
                  std::size_t replicates, const EstimatorSet& estimators,
                  std::uint64_t base_seed, const CellOptions& options) {
    return run_cell(build_model(spec), n, penalty, replicates, estimators, base_seed, options);
}

RateCell run_cell(const TrueModel& model, std::size_t n, const PenaltyConfig& penalty,
                  std::size_t replicates, const EstimatorSet& estimators,
                  std::uint64_t base_seed, const CellOptions& options) {
    if (replicates < 1) throw Error(ErrorKind::ConfigError, "replicates must be >= 1");
    if (n < 1) throw Error(ErrorKind::ConfigError, "n must be >= 1");
    if (!estimators.smgm && !estimators.heuristic && !estimators.heuristic_precision) {
        throw Error(ErrorKind::ConfigError, "no estimator requested");
    }

    RateCell cell;
    cell.n = n;
    cell.p = model.p;
    cell.q = model.q;
    cell.s1 = model.s1;
    cell.s2 = model.s2;
    cell.lambda1 = penalty.lambda1;
    cell.lambda2 = penalty.lambda2;
    cell.replicates = replicates;
    cell.seeds.resize(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        cell.seeds[r] = derive_seed(base_seed, {n, model.p, model.q, r});
    }
    if (n >= 2 && model.p >= 2 && model.q >= 2) {
        cell.predictors = rate_predictors(static_cast<double>(n), static_cast<double>(model.p),
                                          static_cast<double>(model.q),
                                          static_cast<double>(model.s1),
                                          static_cast<double>(model.s2));
    }

    std::vector<ReplicateResult> results(replicates);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t r = next++; r < replicates; r = next++) {
            results[r] =
                run_replicate(model, n, penalty, estimators, cell.seeds[r], options.smgm);
        }
    };
    const std::size_t workers =
        std::min(options.workers == 0 ? default_worker_count() : options.workers, replicates);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (std::size_t r = 0; r < replicates; ++r) {
        ReplicateResult& res = results[r];
        if (res.fatal) std::rethrow_exception(res.fatal);
        if (!res.ok) {
            ++cell.failed_replicates;
            cell.failures.emplace_back(r, res.reason);
            continue;
        }
        cell.replicate_index.push_back(r);
        if (estimators.smgm) {
            cell.errors_smgm_omega.push_back(res.smgm_omega);
            cell.errors_smgm_gamma.push_back(res.smgm_gamma);
            cell.aligned_smgm_omega.push_back(res.aligned_omega);
            cell.aligned_smgm_gamma.push_back(res.aligned_gamma);
        }
        if (estimators.heuristic) {
            cell.errors_heur_sigma.push_back(res.heur_sigma);
            cell.errors_heur_psi.push_back(res.heur_psi);
        }
        if (estimators.heuristic_precision) {
            cell.errors_heur_omega.push_back(res.heur_omega);
            cell.errors_heur_gamma.push_back(res.heur_gamma);
        }
    }
    return cell;
}

SlopeFit fit_rate_slope(std::span<const double> axis, std::span<const double> values) {
    if (axis.size() != values.size()) {
        throw Error(ErrorKind::InsufficientData, "axis and values differ in length");
    }
    const std::size_t m = axis.size();
    if (m < 3) throw Error(ErrorKind::InsufficientData, "slope fit needs at least 3 cells");
    const bool up = axis[1] > axis[0];
    for (std::size_t i = 0; i < m; ++i) {
        if (!(axis[i] > 0.0) || !(values[i] > 0.0) || !std::isfinite(values[i])) {
            throw Error(ErrorKind::InsufficientData, "slope fit needs positive finite values");
        }
        if (i > 0 && (up ? !(axis[i] > axis[i - 1]) : !(axis[i] < axis[i - 1]))) {
            throw Error(ErrorKind::InsufficientData, "varied axis must be strictly monotone");
        }
    }
    std::vector<double> x(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = std::log(axis[i]);
        y[i] = std::log(values[i]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double e = y[i] - fit.intercept - fit.slope * x[i];
        sse += e * e;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

SlopeFit synthetic_slope_selftest(double c) {
    const std::vector<double> n{100.0, 200.0, 400.0};
    std::vector<double> v;
    for (double x : n) v.push_back(c / x);
    return fit_rate_slope(n, v);
}

std::vector<std::string> metric_names() {
    return {"smgm_omega", "smgm_gamma", "smgm_omega_aligned", "smgm_gamma_aligned",
            "heur_sigma", "heur_psi",   "heur_omega",         "heur_gamma"};
}

const std::vector<double>& metric_errors(const RateCell& cell, const std::string& metric) {
    if (metric == "smgm_omega") return cell.errors_smgm_omega;
    if (metric == "smgm_gamma") return cell.errors_smgm_gamma;
    if (metric == "smgm_omega_aligned") return cell.aligned_smgm_omega;
    if (metric == "smgm_gamma_aligned") return cell.aligned_smgm_gamma;
    if (metric == "heur_sigma") return cell.errors_heur_sigma;
    if (metric == "heur_psi") return cell.errors_heur_psi;
    if (metric == "heur_omega") return cell.errors_heur_omega;
    if (metric == "heur_gamma") return cell.errors_heur_gamma;
    throw Error(ErrorKind::InvalidArgument, "unknown metric '" + metric + "'");
}

double metric_predictor(const RatePredictors& pred, const std::string& metric) {
    if (metric.rfind("smgm_omega", 0) == 0) return pred.smgm_omega;
    if (metric.rfind("smgm_gamma", 0) == 0) return pred.smgm_gamma;
    if (metric == "heur_sigma" || metric == "heur_omega") return pred.heur_sigma;
    if (metric == "heur_psi" || metric == "heur_gamma") return pred.heur_psi;
    throw Error(ErrorKind::InvalidArgument, "unknown metric '" + metric + "'");
}

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

// Linear interpolation between order statistics.
double percentile(std::vector<double> values, double fraction) {
    if (values.empty()) throw Error(ErrorKind::InsufficientData, "percentile of empty list");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(fraction, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] + w * (values[hi] - values[lo]);
}

std::vector<CellSummary> summarize_cell(const RateCell& cell) {
    std::vector<CellSummary> out;
    for (const std::string& m : metric_names()) {
        const std::vector<double>& e = metric_errors(cell, m);
        if (e.empty()) continue;
        CellSummary s;
        s.metric = m;
        s.count = e.size();
        s.mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
        s.median = median(e);
        out.push_back(s);
    }
    return out;
}

std::string to_string(Axis axis) {
    switch (axis) {
        case Axis::N: return "n";
        case Axis::P: return "p";
        case Axis::Q: return "q";
    }
    return "?";
}

namespace {

std::size_t axis_value(const RateCell& c, Axis a) {
    return a == Axis::N ? c.n : a == Axis::P ? c.p : c.q;
}

std::pair<std::size_t, std::size_t> fixed_coords(const RateCell& c, Axis a) {
    switch (a) {
        case Axis::N: return {c.p, c.q};
        case Axis::P: return {c.n, c.q};
        case Axis::Q: return {c.n, c.p};
    }
    return {0, 0};
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RateReport build_rate_report(std::vector<RateCell> cells, const ReportOptions& options) {
    RateReport report;
    report.options = options;
    report.cells = std::move(cells);
    const auto& all = report.cells;

    for (Axis axis : {Axis::N, Axis::P, Axis::Q}) {
        std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < all.size(); ++i) groups[fixed_coords(all[i], axis)].push_back(i);

        for (auto& [key, idx] : groups) {
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return axis_value(all[a], axis) < axis_value(all[b], axis);
            });
            bool distinct = idx.size() >= 2;
            for (std::size_t k = 1; k < idx.size(); ++k) {
                if (axis_value(all[idx[k]], axis) == axis_value(all[idx[k - 1]], axis)) {
                    distinct = false;
                }
            }
            if (!distinct) continue;

            for (const std::string& metric : metric_names()) {
                bool present = false;
                for (std::size_t i : idx) present = present || !metric_errors(all[i], metric).empty();
                if (!present) continue;

                std::vector<std::size_t> usable;
                for (std::size_t i : idx) {
                    const RateCell& c = all[i];
                    const double ok = static_cast<double>(c.replicates - c.failed_replicates) /
                                      static_cast<double>(c.replicates);
                    if (ok >= options.min_success_fraction && !metric_errors(c, metric).empty()) {
                        usable.push_back(i);
                    }
                }
                bool have_predictors = true;
                for (std::size_t i : usable) have_predictors = have_predictors && all[i].predictors;

                if (idx.size() >= 3) {
                    SlopeFitEntry entry;
                    entry.metric = metric;
                    entry.axis = axis;
                    entry.cells = usable;
                    if (usable.size() >= 3) {
                        std::vector<double> x, y, pv;
                        for (std::size_t i : usable) {
                            x.push_back(static_cast<double>(axis_value(all[i], axis)));
                            y.push_back(mean_of(metric_errors(all[i], metric)));
                            if (have_predictors) pv.push_back(metric_predictor(*all[i].predictors, metric));
                        }
                        entry.fit = fit_rate_slope(x, y);
                        if (have_predictors) {
                            entry.predicted_slope = fit_rate_slope(x, pv).slope;
                            entry.verdict =
                                std::abs(entry.fit->slope - *entry.predicted_slope) <=
                                    options.slope_tolerance &&
                                entry.fit->r_squared >= options.min_r_squared;
                        }
                    } else {
                        entry.note = "fewer than 3 cells with enough successful replicates";
                    }
                    report.slope_fits.push_back(std::move(entry));
                }

                if (usable.size() >= 2 && have_predictors) {
                    RatioEntry entry;
                    entry.metric = metric;
                    entry.axis = axis;
                    entry.cells = usable;
                    entry.verdict = true;
                    for (std::size_t k = 1; k < usable.size(); ++k) {
                        const RateCell& a = all[usable[k - 1]];
                        const RateCell& b = all[usable[k]];
                        const double ratio = median(metric_errors(b, metric)) /
                                             median(metric_errors(a, metric));
                        const double pred = metric_predictor(*b.predictors, metric) /
                                            metric_predictor(*a.predictors, metric);
                        entry.ratios.push_back(ratio);
                        entry.predicted_ratios.push_back(pred);
                        const double lo = std::min(options.ratio_low * pred, options.ratio_high * pred);
                        const double hi = std::max(options.ratio_low * pred, options.ratio_high * pred);
                        if (!(ratio >= lo && ratio <= hi)) entry.verdict = false;
                    }
                    report.ratio_checks.push_back(std::move(entry));
                }
            }
        }
    }
    return report;
}

}  // namespace kronprec
