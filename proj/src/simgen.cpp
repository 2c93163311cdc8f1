#include "deepraft/simgen.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>

namespace deepraft {

std::string to_string(MeanKind k) {
    switch (k) {
        case MeanKind::interaction: return "interaction";
        case MeanKind::gam: return "gam";
        case MeanKind::linear: return "linear";
    }
    return "?";
}

std::string to_string(ErrorDist d) {
    switch (d) {
        case ErrorDist::gaussian: return "gaussian";
        case ErrorDist::gumbel: return "gumbel";
        case ErrorDist::laplace: return "laplace";
        case ErrorDist::t3: return "t3";
    }
    return "?";
}

MeanKind parse_mean_kind(const std::string& name) {
    if (name == "interaction" || name == "nonlinear") return MeanKind::interaction;
    if (name == "gam") return MeanKind::gam;
    if (name == "linear") return MeanKind::linear;
    throw std::invalid_argument("unknown mean kind: " + name);
}

ErrorDist parse_error_dist(const std::string& name) {
    if (name == "gaussian" || name == "normal") return ErrorDist::gaussian;
    if (name == "gumbel") return ErrorDist::gumbel;
    if (name == "laplace") return ErrorDist::laplace;
    if (name == "t3") return ErrorDist::t3;
    throw std::invalid_argument("unknown error distribution: " + name);
}

void ScenarioConfig::validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("ScenarioConfig: tau must be positive");
    if (n_train == 0 || n_test == 0) throw std::invalid_argument("ScenarioConfig: sample sizes must be positive");
}

Matrix gen_covariates(std::size_t n, std::size_t noise_dims, Rng& rng) {
    if (n == 0) throw std::invalid_argument("gen_covariates: n must be positive");
    const auto rows = static_cast<Eigen::Index>(n);
    Matrix x(rows, static_cast<Eigen::Index>(3 + noise_dims));
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double x1 = coin(rng) ? 1.0 : 0.0;
        const double x2 = 0.5 * x1 + normal(rng);
        const double x3 = 0.5 * x2 + normal(rng);
        x(i, 0) = x1;
        x(i, 1) = x2;
        x(i, 2) = x3;
        for (std::size_t k = 0; k < noise_dims; ++k) x(i, static_cast<Eigen::Index>(3 + k)) = normal(rng);
    }
    return x;
}

double mean_function(MeanKind kind, std::span<const double> x) {
    if (x.size() < 3) throw DimensionError("mean_function: need at least 3 covariates");
    const double x1 = x[0], x2 = x[1], x3 = x[2];
    switch (kind) {
        case MeanKind::interaction: return 2.0 * x1 + x2 * x3 + 2.0 * x3;
        case MeanKind::gam: return x1 + 0.5 * x2 * x2 + std::exp(0.1 * x3);
        case MeanKind::linear: return x1 + 2.0 * x2 + 2.0 * x3;
    }
    throw std::invalid_argument("mean_function: unknown kind");
}

Vector mean_vector(MeanKind kind, const Matrix& covariates) {
    Vector f(covariates.rows());
    const auto cols = static_cast<std::size_t>(covariates.cols());
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
        f[i] = mean_function(kind, {covariates.row(i).data(), cols});
    }
    return f;
}

Vector gen_errors(ErrorDist dist, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("gen_errors: n must be positive");
    const auto len = static_cast<Eigen::Index>(n);
    Vector eps(len);
    switch (dist) {
        case ErrorDist::gaussian: {
            std::normal_distribution<double> d(0.0, 1.0);
            for (auto& v : eps) v = d(rng);
            break;
        }
        case ErrorDist::gumbel: {
            // standard (maximum) Gumbel: mean Euler-Mascheroni, variance pi^2/6
            std::extreme_value_distribution<double> d(0.0, 1.0);
            const double sd = std::numbers::pi / std::sqrt(6.0);
            for (auto& v : eps) v = (d(rng) - std::numbers::egamma) / sd;
            break;
        }
        case ErrorDist::laplace: {
            std::exponential_distribution<double> d(1.0);
            for (auto& v : eps) v = (d(rng) - d(rng)) / std::numbers::sqrt2;
            break;
        }
        case ErrorDist::t3: {
            std::student_t_distribution<double> d(3.0);
            const double sd = std::sqrt(3.0);
            for (auto& v : eps) v = d(rng) / sd;
            break;
        }
    }
    return eps;
}

SimulatedData gen_dataset_at(const ScenarioConfig& cfg, const Matrix& covariates, Rng& rng, bool keep_latent) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(covariates.rows());
    Vector f = mean_vector(cfg.mean_kind, covariates);
    const Vector eps = gen_errors(cfg.error_dist, n, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector t(covariates.rows()), c(covariates.rows()), y(covariates.rows());
    EventVector delta(n);
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
        t[i] = std::exp(f[i] + eps[i]);
        c[i] = cfg.tau * (1.0 - unif(rng));  // U in (0, 1]
        const Observation obs = observe(t[i], c[i]);
        delta[static_cast<std::size_t>(i)] = obs.event;
        y[i] = obs.time;
    }
    SimulatedData out{SurvivalDataset(std::move(y), std::move(delta), covariates), std::move(f), {}, {}};
    if (keep_latent) {
        out.failure = std::move(t);
        out.censoring = std::move(c);
    }
    return out;
}

SimulatedData gen_dataset(const ScenarioConfig& cfg, std::size_t n, Rng& rng, bool keep_latent) {
    Matrix x = gen_covariates(n, cfg.noise_dims, rng);
    return gen_dataset_at(cfg, x, rng, keep_latent);
}

ScenarioSplit gen_scenario(const ScenarioConfig& cfg, std::size_t replicate) {
    Rng train_rng = make_stream(cfg.seed, 1000 + 2 * replicate);
    Rng test_rng = make_stream(cfg.seed, 1000 + 2 * replicate + 1);
    SimulatedData train = gen_dataset(cfg, cfg.n_train, train_rng);
    SimulatedData test = gen_dataset(cfg, cfg.n_test, test_rng);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

ScenarioConfig bias_variance_defaults(MeanKind kind, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.mean_kind = kind;
    cfg.error_dist = ErrorDist::gaussian;
    cfg.tau = 40.0;
    cfg.n_train = 3000;
    cfg.n_test = 2000;
    cfg.seed = seed;
    return cfg;
}

std::vector<std::size_t> noise_dimension_sweep() { return {0, 10, 50, 100, 300, 500, 700, 1000}; }

BiasVarianceResult bias_variance_protocol(const ScenarioConfig& cfg, std::size_t replicates,
                                          const std::vector<NamedFitter>& fitters) {
    cfg.validate();
    if (replicates < 2) throw std::invalid_argument("bias_variance_protocol: need at least 2 replicates");

    Rng design_rng = make_stream(cfg.seed, 7);
    const Matrix train_x = gen_covariates(cfg.n_train, cfg.noise_dims, design_rng);
    const Matrix test_x = gen_covariates(cfg.n_test, cfg.noise_dims, design_rng);

    BiasVarianceResult result;
    result.true_mean = mean_vector(cfg.mean_kind, test_x);
    const auto points = result.true_mean.size();
    const auto R = static_cast<std::ptrdiff_t>(replicates);

    std::vector<Matrix> predictions(fitters.size(), Matrix(R, points));
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < R; ++r) {
        try {
            Rng rng = make_stream(cfg.seed, 5000 + static_cast<std::uint64_t>(r));
            const SimulatedData train = gen_dataset_at(cfg, train_x, rng);
            for (std::size_t k = 0; k < fitters.size(); ++k) {
                const std::uint64_t fit_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(r) * 131ULL + k;
                Vector pred = fitters[k].fit(train.data, test_x, fit_seed);
                if (pred.size() != points) throw DimensionError("bias_variance_protocol: fitter output length");
                predictions[k].row(r) = pred.transpose();
            }
        } catch (...) {
#pragma omp critical(deepraft_bv_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t k = 0; k < fitters.size(); ++k) {
        const Matrix& pred = predictions[k];
        BiasVarianceSummary s;
        s.name = fitters[k].name;
        const Vector mean = pred.colwise().mean().transpose();
        s.squared_bias = (mean - result.true_mean).array().square();
        s.variance = (pred.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        s.mse = (pred.rowwise() - result.true_mean.transpose()).array().square().colwise().mean().transpose();
        s.mean_squared_bias = s.squared_bias.mean();
        s.mean_variance = s.variance.mean();
        s.mean_mse = s.mse.mean();
        const auto sd = [](const Vector& v) {
            const double m = v.mean();
            return std::sqrt((v.array() - m).square().sum() / static_cast<double>(std::max<Eigen::Index>(v.size() - 1, 1)));
        };
        s.sd_squared_bias = sd(s.squared_bias);
        s.sd_variance = sd(s.variance);
        result.fitters.push_back(std::move(s));
    }
    return result;
}

}  // namespace deepraft
