#pragma once

// Linear AFT baselines: log-normal maximum likelihood and the induced-smoothed
// Gehan rank estimator.

#include "deepraft/core.hpp"

#include <cstddef>
#include <optional>

namespace deepraft {

struct LinearAftFit {
    Vector beta;                  // intercept first, then p slopes
    std::optional<double> sigma;  // parametric fit only
    bool converged = false;
    std::size_t iterations = 0;

    [[nodiscard]] Vector slopes() const { return beta.tail(beta.size() - 1); }
    [[nodiscard]] double intercept() const { return beta[0]; }
};

[[nodiscard]] Vector predict_linear(const LinearAftFit& fit, const Matrix& covariates);

// ---------------------------------------------------------------------------
// Parametric (log-normal errors)
// ---------------------------------------------------------------------------

struct PaftOptions {
    std::size_t max_iterations = 100;
    double gradient_tolerance = 1e-8;
};

/// sum_i [Delta_i log f(y_i) + (1 - Delta_i) log S(y_i)] on the log-time scale
/// for log Y = x'beta + sigma eps, eps ~ N(0, 1). beta includes the intercept.
[[nodiscard]] double paft_log_likelihood(const SurvivalDataset& data, const Vector& beta, double sigma);

/// Damped Newton ascent on (beta, log sigma), started from least squares.
/// Every accepted iteration increases the log-likelihood; the trace of
/// accepted values is written to likelihood_trace when provided.
[[nodiscard]] LinearAftFit fit_paft_lognormal(const SurvivalDataset& data, const PaftOptions& options = {},
                                              std::vector<double>* likelihood_trace = nullptr);

// ---------------------------------------------------------------------------
// Semiparametric (Gehan rank)
// ---------------------------------------------------------------------------

enum class BandwidthForm {
    quadratic,  ///< r_ij = |x_i - x_j|^2 / n
    root,       ///< r_ij = sqrt(|x_i - x_j|^2 / n)
};

struct SmoothingOptions {
    BandwidthForm form = BandwidthForm::quadratic;
    double scale = 1.0;  // multiplies every r_ij
};

/// sum_i sum_j Delta_i (x_i - x_j) Phi{(e_j - e_i) / r_ij} with
/// e = log Y - X slopes. Pairs with r_ij = 0 use I{e_j >= e_i}, 1/2 at ties.
[[nodiscard]] Vector smoothed_estimating_function(const Vector& slopes, const SurvivalDataset& data,
                                                  const SmoothingOptions& smoothing = {});

/// Smoothed convex surrogate whose gradient is the estimating function:
/// sum Delta_i r_ij G((e_j - e_i) / r_ij), G(z) = z Phi(z) + phi(z).
struct SmoothedObjective {
    double value = 0.0;
    Vector gradient;
    Eigen::MatrixXd hessian;
};

[[nodiscard]] SmoothedObjective smoothed_gehan_objective(const Vector& slopes, const SurvivalDataset& data,
                                                         const SmoothingOptions& smoothing, bool with_hessian);

/// Unsmoothed Gehan loss sum Delta_i [e_i - e_j]^- at the given slopes.
[[nodiscard]] double gehan_objective(const Vector& slopes, const SurvivalDataset& data);

struct SaftOptions {
    SmoothingOptions smoothing;
    std::size_t max_iterations = 200;
    double step_tolerance = 1e-7;
    double root_tolerance = 1e-4;  // on |U|_inf / (n * events)
    CenteringMethod centering = CenteringMethod::kaplan_meier;
    std::optional<Vector> start;   // slopes; defaults to the PAFT slopes
};

/// Newton descent with backtracking on the smoothed objective. The intercept
/// entry is recovered afterwards with the configured centering rule.
[[nodiscard]] LinearAftFit fit_saft_gehan(const SurvivalDataset& data, const SaftOptions& options = {});

}  // namespace deepraft
