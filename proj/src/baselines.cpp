#include "deepraft/baselines.hpp"

#include "deepraft/gehan.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <string>

namespace deepraft {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

// phi(z) / (1 - Phi(z))
double inverse_mills(double z) {
    if (z > 25.0) {
        const double z2 = z * z;
        return z + 1.0 / z - 2.0 / (z * z2) + 10.0 / (z * z2 * z2);
    }
    return normal_pdf(z) / (0.5 * std::erfc(z * kInvSqrt2));
}

double log_survival(double z) {
    if (z > 25.0) return std::log(normal_pdf(z)) - std::log(inverse_mills(z));
    return std::log(0.5 * std::erfc(z * kInvSqrt2));
}

Matrix with_intercept(const Matrix& x) {
    Matrix z(x.rows(), x.cols() + 1);
    z.col(0).setOnes();
    z.rightCols(x.cols()) = x;
    return z;
}

struct LikelihoodState {
    double value = 0.0;
    Vector gradient;          // (beta, log sigma)
    Eigen::MatrixXd hessian;
};

LikelihoodState paft_state(const Matrix& design, const Vector& log_y, const EventVector& events,
                           const Vector& beta, double log_sigma) {
    const Eigen::Index q = design.cols();
    const double sigma = std::exp(log_sigma);
    LikelihoodState s;
    s.gradient = Vector::Zero(q + 1);
    s.hessian = Eigen::MatrixXd::Zero(q + 1, q + 1);
    const Vector z = (log_y - design * beta) / sigma;
    constexpr double half_log_2pi = 0.91893853320467274178;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double zi = z[i];
        // g1 = dl/dz, g2 = d2l/dz2; z depends on beta through -x/sigma and on
        // log sigma through -z
        double g1 = 0.0;
        double g2 = 0.0;
        if (events[static_cast<std::size_t>(i)]) {
            s.value += -log_sigma - 0.5 * zi * zi - half_log_2pi;
            g1 = -zi;
            g2 = -1.0;
            s.gradient[q] -= 1.0;
        } else {
            const double lam = inverse_mills(zi);
            s.value += log_survival(zi);
            g1 = -lam;
            g2 = -lam * (lam - zi);
        }
        const auto x = design.row(i).transpose();
        s.gradient.head(q) += (-g1 / sigma) * x;
        s.gradient[q] += -g1 * zi;
        s.hessian.topLeftCorner(q, q) += (g2 / (sigma * sigma)) * (x * x.transpose());
        s.hessian.col(q).head(q) += ((g2 * zi + g1) / sigma) * x;
        s.hessian(q, q) += g2 * zi * zi + g1 * zi;
    }
    s.hessian.row(q).head(q) = s.hessian.col(q).head(q).transpose();
    return s;
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Vector predict_linear(const LinearAftFit& fit, const Matrix& covariates) {
    if (covariates.cols() + 1 != fit.beta.size()) {
        throw DimensionError("predict_linear: covariate matrix has " + std::to_string(covariates.cols()) +
                             " columns, fit has " + std::to_string(fit.beta.size() - 1) + " slopes");
    }
    return (covariates * fit.slopes()).array() + fit.intercept();
}

double paft_log_likelihood(const SurvivalDataset& data, const Vector& beta, double sigma) {
    if (static_cast<std::size_t>(beta.size()) != data.p() + 1) throw DimensionError("paft_log_likelihood: beta length");
    if (!(sigma > 0.0)) throw std::invalid_argument("paft_log_likelihood: sigma must be positive");
    return paft_state(with_intercept(data.covariates()), log_times(data), data.event(), beta, std::log(sigma)).value;
}

LinearAftFit fit_paft_lognormal(const SurvivalDataset& data, const PaftOptions& options,
                                std::vector<double>* likelihood_trace) {
    require_events(data, "fit_paft_lognormal");
    const std::size_t n = data.n();
    const std::size_t p = data.p();
    if (n <= p + 1) throw std::invalid_argument("fit_paft_lognormal: need n > p + 1");

    const Matrix design = with_intercept(data.covariates());
    const Vector log_y = log_times(data);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        throw SingularDesignError("fit_paft_lognormal: design matrix is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " + std::to_string(design.cols()) + ")");
    }

    const auto q = design.cols();
    Vector beta = qr.solve(log_y);
    double rss = (log_y - design * beta).squaredNorm();
    double log_sigma = 0.5 * std::log(std::max(rss / static_cast<double>(n), 1e-12));

    LinearAftFit fit;
    LikelihoodState state = paft_state(design, log_y, data.event(), beta, log_sigma);
    if (likelihood_trace) likelihood_trace->assign(1, state.value);

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        if (max_abs(state.gradient) < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        // ascent direction from the negated Hessian, shifted until positive definite
        Eigen::MatrixXd neg = -state.hessian;
        double shift = 0.0;
        Vector step;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::LLT<Eigen::MatrixXd> llt(neg + shift * Eigen::MatrixXd::Identity(q + 1, q + 1));
            if (llt.info() == Eigen::Success) {
                step = llt.solve(state.gradient);
                break;
            }
            shift = shift == 0.0 ? 1e-8 * (1.0 + neg.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
        }
        if (step.size() == 0) step = state.gradient;

        double t = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            const Vector trial = (Vector(q + 1) << beta, log_sigma).finished() + t * step;
            LikelihoodState next = paft_state(design, log_y, data.event(), trial.head(q), trial[q]);
            if (std::isfinite(next.value) && next.value >= state.value) {
                beta = trial.head(q);
                log_sigma = trial[q];
                state = std::move(next);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        fit.iterations = iter + 1;
        if (!accepted) break;
        if (likelihood_trace) likelihood_trace->push_back(state.value);
    }
    if (!fit.converged && max_abs(state.gradient) < options.gradient_tolerance) fit.converged = true;

    fit.beta = beta;
    fit.sigma = std::exp(log_sigma);
    return fit;
}

// ---------------------------------------------------------------------------

namespace {

double bandwidth(double squared_distance, std::size_t n, const SmoothingOptions& smoothing) {
    const double q = squared_distance / static_cast<double>(n);
    return smoothing.scale * (smoothing.form == BandwidthForm::root ? std::sqrt(q) : q);
}

void check_slopes(const Vector& slopes, const SurvivalDataset& data, const char* what) {
    if (static_cast<std::size_t>(slopes.size()) != data.p()) {
        throw DimensionError(std::string(what) + ": " + std::to_string(slopes.size()) + " slopes for " +
                             std::to_string(data.p()) + " covariates");
    }
}

}  // namespace

Vector smoothed_estimating_function(const Vector& slopes, const SurvivalDataset& data,
                                    const SmoothingOptions& smoothing) {
    check_slopes(slopes, data, "smoothed_estimating_function");
    return smoothed_gehan_objective(slopes, data, smoothing, false).gradient;
}

SmoothedObjective smoothed_gehan_objective(const Vector& slopes, const SurvivalDataset& data,
                                           const SmoothingOptions& smoothing, bool with_hessian) {
    check_slopes(slopes, data, "smoothed_gehan_objective");
    const auto n = static_cast<std::ptrdiff_t>(data.n());
    const auto p = static_cast<Eigen::Index>(data.p());
    const Matrix& x = data.covariates();
    const Vector e = log_times(data) - x * slopes;
    const std::uint8_t* events = data.event().data();

    SmoothedObjective total;
    total.gradient = Vector::Zero(p);
    if (with_hessian) total.hessian = Eigen::MatrixXd::Zero(p, p);

#pragma omp parallel
    {
        double value = 0.0;
        Vector grad = Vector::Zero(p);
        Eigen::MatrixXd hess;
        if (with_hessian) hess = Eigen::MatrixXd::Zero(p, p);
        Vector diff(p);
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            if (!events[i]) continue;
            for (std::ptrdiff_t j = 0; j < n; ++j) {
                if (j == i) continue;
                diff = (x.row(i) - x.row(j)).transpose();
                const double a = e[j] - e[i];
                const double r = bandwidth(diff.squaredNorm(), static_cast<std::size_t>(n), smoothing);
                if (r > 0.0) {
                    const double z = a / r;
                    const double cdf = normal_cdf(z);
                    const double pdf = normal_pdf(z);
                    value += a * cdf + r * pdf;
                    grad += cdf * diff;
                    if (with_hessian && pdf > 0.0) hess.selfadjointView<Eigen::Lower>().rankUpdate(diff, pdf / r);
                } else {
                    // identical covariate rows: diff is zero, only the value moves
                    value += a > 0.0 ? a : 0.0;
                }
            }
        }
#pragma omp critical(deepraft_smoothed_reduce)
        {
            total.value += value;
            total.gradient += grad;
            if (with_hessian) total.hessian += hess;
        }
    }
    if (with_hessian) {
        const Eigen::MatrixXd lower = total.hessian;
        total.hessian = lower.selfadjointView<Eigen::Lower>();
    }
    return total;
}

double gehan_objective(const Vector& slopes, const SurvivalDataset& data) {
    check_slopes(slopes, data, "gehan_objective");
    return full_gehan_loss(residuals(data, data.covariates() * slopes), data.events());
}

LinearAftFit fit_saft_gehan(const SurvivalDataset& data, const SaftOptions& options) {
    require_events(data, "fit_saft_gehan");
    const auto p = static_cast<Eigen::Index>(data.p());
    Vector slopes;
    if (options.start) {
        check_slopes(*options.start, data, "fit_saft_gehan");
        slopes = *options.start;
    } else {
        slopes = fit_paft_lognormal(data).slopes();
    }

    const double root_scale = static_cast<double>(data.n()) * static_cast<double>(data.event_count());
    LinearAftFit fit;
    SmoothedObjective obj = smoothed_gehan_objective(slopes, data, options.smoothing, true);
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        Vector direction;
        double shift = 0.0;
        const double diag = obj.hessian.diagonal().cwiseAbs().maxCoeff();
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(obj.hessian + shift * Eigen::MatrixXd::Identity(p, p));
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                direction = -ldlt.solve(obj.gradient);
                if (direction.allFinite() && direction.dot(obj.gradient) < 0.0) break;
            }
            direction.resize(0);
            shift = shift == 0.0 ? 1e-10 * (diag + 1.0) : shift * 10.0;
        }
        if (direction.size() == 0) direction = -obj.gradient / (diag + 1.0);

        const double slope = direction.dot(obj.gradient);
        double t = 1.0;
        Vector trial;
        SmoothedObjective next;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            trial = slopes + t * direction;
            next = smoothed_gehan_objective(trial, data, options.smoothing, true);
            if (next.value <= obj.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        fit.iterations = iter + 1;
        if (!accepted) break;
        const double moved = max_abs(trial - slopes);
        slopes = trial;
        obj = std::move(next);
        if (moved < options.step_tolerance) break;
    }
    fit.converged = max_abs(obj.gradient) / root_scale < options.root_tolerance;

    const double intercept =
        location_offset(residuals(data, data.covariates() * slopes), data.events(), options.centering);
    fit.beta = Vector(p + 1);
    fit.beta << intercept, slopes;
    return fit;
}

}  // namespace deepraft
