#pragma once

// Simulated AFT data: log T = f(x) + eps, C = tau U, Y = min(T, C).

#include "deepraft/core.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace deepraft {

enum class MeanKind { interaction, gam, linear };
enum class ErrorDist { gaussian, gumbel, laplace, t3 };

[[nodiscard]] std::string to_string(MeanKind k);
[[nodiscard]] std::string to_string(ErrorDist d);
[[nodiscard]] MeanKind parse_mean_kind(const std::string& name);
[[nodiscard]] ErrorDist parse_error_dist(const std::string& name);

struct ScenarioConfig {
    MeanKind mean_kind = MeanKind::interaction;
    ErrorDist error_dist = ErrorDist::gaussian;
    double tau = 40.0;
    std::size_t n_train = 1000;
    std::size_t n_test = 2000;
    std::size_t noise_dims = 0;  // K extra zero-effect covariates
    std::uint64_t seed = 0;

    void validate() const;
};

/// Columns: x1 ~ Bernoulli(0.5), x2 ~ N(x1/2, 1), x3 ~ N(x2/2, 1), then K
/// standard normal columns.
[[nodiscard]] Matrix gen_covariates(std::size_t n, std::size_t noise_dims, Rng& rng);

/// interaction: 2x1 + x2 x3 + 2x3; gam: x1 + 0.5 x2^2 + exp(0.1 x3);
/// linear: x1 + 2x2 + 2x3. Coordinates past the third have no effect.
[[nodiscard]] double mean_function(MeanKind kind, std::span<const double> x);
[[nodiscard]] Vector mean_vector(MeanKind kind, const Matrix& covariates);

/// Draws standardised to mean 0 and variance 1 with the law's exact moments.
[[nodiscard]] Vector gen_errors(ErrorDist dist, std::size_t n, Rng& rng);

/// Right censoring of one subject: (Y, Delta) = (min(T, C), I(T <= C)).
struct Observation {
    double time = 0.0;
    std::uint8_t event = 0;
};

[[nodiscard]] inline Observation observe(double failure, double censoring) noexcept {
    return failure <= censoring ? Observation{failure, 1} : Observation{censoring, 0};
}

struct SimulatedData {
    SurvivalDataset data;
    Vector true_mean;                 // f(x_i)
    std::optional<Vector> failure;    // latent T, kept on request
    std::optional<Vector> censoring;  // latent C, kept on request
};

[[nodiscard]] SimulatedData gen_dataset_at(const ScenarioConfig& cfg, const Matrix& covariates, Rng& rng,
                                           bool keep_latent = false);
[[nodiscard]] SimulatedData gen_dataset(const ScenarioConfig& cfg, std::size_t n, Rng& rng,
                                        bool keep_latent = false);

struct ScenarioSplit {
    SimulatedData train;
    SimulatedData test;
};

/// Independent train (n_train) and test (n_test) sets for replicate r.
[[nodiscard]] ScenarioSplit gen_scenario(const ScenarioConfig& cfg, std::size_t replicate);

// ---------------------------------------------------------------------------
// Bias / variance decomposition
// ---------------------------------------------------------------------------

/// Maps a training set, test covariates and a replicate seed to predictions of
/// f at the test covariates. Must be safe to call concurrently.
using Fitter = std::function<Vector(const SurvivalDataset& train, const Matrix& test_x, std::uint64_t seed)>;

struct NamedFitter {
    std::string name;
    Fitter fit;
};

struct BiasVarianceSummary {
    std::string name;
    Vector squared_bias;  // per test point
    Vector variance;      // per test point, divisor R
    Vector mse;           // per test point, mean over replicates of (fhat - f)^2
    double mean_squared_bias = 0.0;
    double mean_variance = 0.0;
    double mean_mse = 0.0;
    double sd_squared_bias = 0.0;  // spread across test points
    double sd_variance = 0.0;
};

struct BiasVarianceResult {
    Vector true_mean;  // f at the fixed test points
    std::vector<BiasVarianceSummary> fitters;
};

/// Training and test covariates are drawn once; every replicate redraws (T, C)
/// at the fixed training covariates, refits, and predicts at the fixed test
/// points.
[[nodiscard]] BiasVarianceResult bias_variance_protocol(const ScenarioConfig& cfg, std::size_t replicates,
                                                        const std::vector<NamedFitter>& fitters);

/// Defaults for the decomposition: tau = 40, n_train = 3000, n_test = 2000,
/// gaussian errors.
[[nodiscard]] ScenarioConfig bias_variance_defaults(MeanKind kind, std::uint64_t seed);

/// Noise-dimension sweep points for the high-dimensional study.
[[nodiscard]] std::vector<std::size_t> noise_dimension_sweep();

}  // namespace deepraft
