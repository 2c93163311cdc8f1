#include "deepraft/baselines.hpp"
#include "deepraft/gehan.hpp"
#include "deepraft/reference.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/QR>

using namespace deepraft;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Censored log-normal log-likelihood written from the density and survival.
double oracle_loglik(const SurvivalDataset& data, const Vector& beta, double sigma) {
    const Vector ly = log_times(data);
    double total = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double mu = beta[0] + data.covariates().row(r).dot(beta.tail(beta.size() - 1));
        const double z = (ly[r] - mu) / sigma;
        if (data.event()[i]) {
            total += std::log(std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.141592653589793)));
        } else {
            total += std::log(0.5 * std::erfc(z / kSqrt2));
        }
    }
    return total;
}

// log Y = 0.5 + x1 - 2 x2 + sigma eps, censored by an independent log-normal.
SurvivalDataset linear_data(std::size_t n, double sigma, double censor_shift, Rng& rng) {
    std::normal_distribution<double> z;
    Matrix x(static_cast<Eigen::Index>(n), 2);
    Vector y(static_cast<Eigen::Index>(n));
    EventVector d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x(r, 0) = z(rng);
        x(r, 1) = z(rng);
        const double t = 0.5 + x(r, 0) - 2.0 * x(r, 1) + sigma * z(rng);
        const double c = censor_shift + 2.0 * z(rng);
        d[i] = t <= c ? 1 : 0;
        y[r] = std::exp(std::min(t, c));
    }
    d[0] = 1;
    return SurvivalDataset(y, d, x);
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("log-likelihood agrees with the density oracle") {
    Rng rng = make_stream(31, 0);
    const auto data = linear_data(60, 1.0, 1.0, rng);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector beta = testing::random_vector(3, rng);
        const double sigma = 0.5 + 0.3 * rep;
        CHECK(paft_log_likelihood(data, beta, sigma) == doctest::Approx(oracle_loglik(data, beta, sigma)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(paft_log_likelihood(data, Vector::Zero(2), 1.0), DimensionError);
    CHECK_THROWS(paft_log_likelihood(data, Vector::Zero(3), 0.0));
}

TEST_CASE("uncensored PAFT is ordinary least squares with divisor-n sigma") {
    Rng rng = make_stream(32, 0);
    const auto data = linear_data(200, 0.7, 1e6, rng);
    REQUIRE(data.event_count() == data.n());
    const auto fit = fit_paft_lognormal(data);
    CHECK(fit.converged);

    Matrix design(200, 3);
    design.col(0).setOnes();
    design.rightCols(2) = data.covariates();
    const Eigen::MatrixXd dz = design;
    const Vector ols = dz.colPivHouseholderQr().solve(log_times(data));
    const double sigma = std::sqrt((log_times(data) - design * ols).squaredNorm() / 200.0);
    CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(*fit.sigma == doctest::Approx(sigma).epsilon(1e-8));
}

TEST_CASE("censored PAFT: stationary point and monotone likelihood trace") {
    Rng rng = make_stream(33, 0);
    const auto data = linear_data(3000, 1.0, 0.5, rng);
    std::vector<double> trace;
    const auto fit = fit_paft_lognormal(data, {}, &trace);
    CHECK(fit.converged);
    REQUIRE(trace.size() >= 2);
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] >= trace[k - 1]);
    CHECK(trace.back() == doctest::Approx(paft_log_likelihood(data, fit.beta, *fit.sigma)).epsilon(1e-12));

    // central differences of the oracle vanish at the optimum
    const double h = 1e-5;
    const double scale = static_cast<double>(data.n());
    for (Eigen::Index k = 0; k < 3; ++k) {
        Vector up = fit.beta, down = fit.beta;
        up[k] += h;
        down[k] -= h;
        const double fd = (oracle_loglik(data, up, *fit.sigma) - oracle_loglik(data, down, *fit.sigma)) / (2 * h);
        CHECK(std::abs(fd) / scale < 1e-6);
    }
    const double s = *fit.sigma;
    const double fd_sigma = (oracle_loglik(data, fit.beta, s + h) - oracle_loglik(data, fit.beta, s - h)) / (2 * h);
    CHECK(std::abs(fd_sigma) / scale < 1e-6);

    // the estimate is near the truth
    CAPTURE(fit.beta.transpose());
    CAPTURE(*fit.sigma);
    CHECK(std::abs(fit.beta[1] - 1.0) < 0.1);
    CHECK(std::abs(fit.beta[2] + 2.0) < 0.1);
}

TEST_CASE("PAFT input errors") {
    Matrix x(5, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
    const auto singular = testing::make_dataset({1, 2, 3, 4, 5}, {1, 1, 0, 1, 1}, x);
    CHECK_THROWS_AS(fit_paft_lognormal(singular), SingularDesignError);
    Rng rng = make_stream(34, 0);
    const Matrix z = Matrix::Random(4, 1);
    const auto censored = testing::make_dataset({1, 2, 3, 4}, {0, 0, 0, 0}, z);
    CHECK_THROWS_AS(fit_paft_lognormal(censored), EmptyEventError);
    CHECK_THROWS_AS(fit_saft_gehan(censored), EmptyEventError);
}

TEST_CASE("smoothed estimating function matches the serial reference") {
    Rng rng = make_stream(35, 0);
    for (int rep = 0; rep < 6; ++rep) {
        const auto data = testing::random_dataset(40 + 10 * rep, 3, rng);
        const Vector slopes = testing::random_vector(3, rng, 0.5);
        for (const bool root : {false, true}) {
            const SmoothingOptions opts{root ? BandwidthForm::root : BandwidthForm::quadratic, 1.3};
            const Vector lib = smoothed_estimating_function(slopes, data, opts);
            const Vector ref = reference::smoothed_estimating_function(slopes, data, root, 1.3);
            CHECK((lib - ref).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + ref.cwiseAbs().maxCoeff()));
        }
    }
    CHECK_THROWS_AS(smoothed_estimating_function(Vector::Zero(2), testing::random_dataset(5, 3, rng)),
                    DimensionError);
}

TEST_CASE("smoothed estimating function edge cases") {
    SUBCASE("identical covariates give the zero vector") {
        const auto data = testing::make_dataset({1, 2, 3, 4}, {1, 0, 1, 1}, Matrix::Constant(4, 2, 0.7));
        CHECK(smoothed_estimating_function(Vector::Zero(2), data).isZero(0.0));
    }
    SUBCASE("a constant column contributes zero") {
        Rng rng = make_stream(36, 0);
        const auto base = testing::random_dataset(30, 2, rng);
        Matrix x(30, 3);
        x.leftCols(2) = base.covariates();
        x.col(2).setConstant(4.0);
        const auto data = base.with_covariates(x);
        const Vector u = smoothed_estimating_function(Vector::Zero(3), data);
        CHECK(u[2] == 0.0);
    }
    SUBCASE("vanishing bandwidth approaches the unsmoothed sum") {
        Rng rng = make_stream(37, 0);
        const auto data = testing::random_dataset(30, 2, rng);
        const Vector slopes = testing::random_vector(2, rng);
        const Vector e = log_times(data) - data.covariates() * slopes;
        Vector raw = Vector::Zero(2);
        for (Eigen::Index i = 0; i < 30; ++i) {
            if (!data.event()[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = 0; j < 30; ++j) {
                if (j != i && e[j] >= e[i]) raw += (data.covariates().row(i) - data.covariates().row(j)).transpose();
            }
        }
        const Vector tiny = smoothed_estimating_function(slopes, data, {BandwidthForm::quadratic, 1e-9});
        CHECK((tiny - raw).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("smoothed objective gradient and Hessian match finite differences") {
    Rng rng = make_stream(38, 0);
    const double h = 1e-5;
    for (int rep = 0; rep < 4; ++rep) {
        const auto data = testing::random_dataset(35, 3, rng);
        const Vector b = testing::random_vector(3, rng, 0.5);
        const SmoothingOptions opts{rep % 2 ? BandwidthForm::root : BandwidthForm::quadratic, 1.0};
        const auto at = smoothed_gehan_objective(b, data, opts, true);
        for (Eigen::Index k = 0; k < 3; ++k) {
            Vector up = b, down = b;
            up[k] += h;
            down[k] -= h;
            const auto ou = smoothed_gehan_objective(up, data, opts, true);
            const auto od = smoothed_gehan_objective(down, data, opts, true);
            const double fd = (ou.value - od.value) / (2 * h);
            CHECK(testing::rel_err(fd, at.gradient[k], 1.0) < 1e-5);
            const Vector col = (ou.gradient - od.gradient) / (2 * h);
            CHECK((col - at.hessian.col(k)).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + at.hessian.cwiseAbs().maxCoeff()));
        }
        CHECK((at.hessian - at.hessian.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("SAFT recovers noiseless slopes") {
    Rng rng = make_stream(39, 0);
    std::normal_distribution<double> z;
    const std::size_t n = 150;
    Matrix x(n, 2);
    Vector y(n);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = z(rng);
        y[i] = std::exp(1.0 + 0.8 * x(i, 0) - 1.5 * x(i, 1));
    }
    const SurvivalDataset data(y, EventVector(n, 1), x);
    SaftOptions opts;
    opts.start = Vector::Zero(2);
    const auto fit = fit_saft_gehan(data, opts);
    CHECK(std::abs(fit.slopes()[0] - 0.8) < 1e-2);
    CHECK(std::abs(fit.slopes()[1] + 1.5) < 1e-2);
    CHECK(std::abs(fit.intercept() - 1.0) < 1e-2);
}

TEST_CASE("SAFT lowers the Gehan objective relative to PAFT") {
    Rng rng = make_stream(40, 0);
    for (int rep = 0; rep < 3; ++rep) {
        const auto data = linear_data(200, 1.0, 0.5, rng);
        const auto paft = fit_paft_lognormal(data);
        const auto saft = fit_saft_gehan(data);
        CHECK(saft.converged);
        CHECK(gehan_objective(saft.slopes(), data) <= gehan_objective(paft.slopes(), data) * (1.0 + 1e-9));
    }
}

TEST_CASE("SAFT agrees with a direct grid minimisation of the Gehan loss") {
    Rng rng = make_stream(41, 0);
    const auto data = linear_data(50, 1.0, 0.5, rng);
    const auto saft = fit_saft_gehan(data);
    // coarse-to-fine grid search on the unsmoothed objective
    Vector best = saft.slopes();
    double best_value = gehan_objective(best, data);
    for (const double step : {0.05, 0.01, 0.002}) {
        const Vector centre = best;
        for (int a = -25; a <= 25; ++a) {
            for (int b = -25; b <= 25; ++b) {
                Vector trial = centre;
                trial[0] += a * step;
                trial[1] += b * step;
                const double v = gehan_objective(trial, data);
                if (v < best_value) {
                    best_value = v;
                    best = trial;
                }
            }
        }
    }
    CHECK((best - saft.slopes()).cwiseAbs().maxCoeff() < 0.1);
    CHECK(gehan_objective(saft.slopes(), data) <= best_value * 1.01);
}

TEST_CASE("predict_linear") {
    LinearAftFit fit;
    fit.beta = Vector(3);
    fit.beta << 1.0, 2.0, -1.0;
    Matrix x(2, 2);
    x << 1, 1, 0, 3;
    const Vector p = predict_linear(fit, x);
    CHECK(p[0] == 2.0);
    CHECK(p[1] == -2.0);
    CHECK_THROWS_AS(predict_linear(fit, Matrix(2, 3)), DimensionError);
}

}  // TEST_SUITE
