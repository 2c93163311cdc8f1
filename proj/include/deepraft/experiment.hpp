#pragma once

// Method dispatch and scenario runs shared by the CLI and the acceptance
// suite.

#include "deepraft/baselines.hpp"
#include "deepraft/net.hpp"
#include "deepraft/simgen.hpp"

#include <string>
#include <vector>

namespace deepraft {

enum class Method { deepr, paft, saft };

[[nodiscard]] std::string to_string(Method m);
[[nodiscard]] std::string display_name(Method m);  // "DeepR-AFT", "PAFT", "SAFT"
[[nodiscard]] Method parse_method(const std::string& name);

/// One config = one reproducible run: a scenario grid, the methods, the
/// network and optimiser settings, and the seeds.
struct ExperimentConfig {
    std::vector<MeanKind> mean_kinds{MeanKind::interaction};
    std::vector<ErrorDist> error_dists{ErrorDist::gaussian};
    std::vector<double> taus{40.0};
    std::vector<std::size_t> n_trains{1000};
    std::size_t n_test = 2000;
    std::size_t noise_dims = 0;
    std::size_t replicates = 1;
    std::uint64_t seed = 0;
    std::vector<Method> methods{Method::deepr, Method::paft, Method::saft};

    /// "auto" picks the simulation architecture, all-linear for the linear
    /// mean; "real" the deeper real-data network; otherwise a list such as
    /// "128:relu,32:relu,16:relu,1:linear".
    std::string architecture = "auto";
    TrainConfig train;
    bool auto_learning_rate = true;  // learning rate from (n_train, error law)
    bool auto_pairs = true;          // pairs per event from n_train
    CenteringMethod centering = CenteringMethod::kaplan_meier;
    SmoothingOptions smoothing;

    [[nodiscard]] std::vector<ScenarioConfig> scenarios() const;
};

/// Settings for fitting one method on one dataset.
struct FitSettings {
    std::vector<LayerSpec> layers = simulation_architecture();
    TrainConfig train;
    CenteringMethod centering = CenteringMethod::kaplan_meier;
    SmoothingOptions smoothing;
};

/// Resolves "auto" entries of the config for a given scenario.
[[nodiscard]] FitSettings resolve_fit_settings(const ExperimentConfig& config, const ScenarioConfig& scenario);

/// Every method is returned as a network: the linear baselines become a
/// single 1:linear layer holding (slopes, intercept). Predictions from the
/// returned network are located on the log-time scale.
[[nodiscard]] NetworkParams fit_model(Method method, const SurvivalDataset& train, const FitSettings& settings);

[[nodiscard]] NetworkParams linear_fit_as_network(const LinearAftFit& fit);

struct MethodSummary {
    Method method = Method::deepr;
    std::vector<double> mse;      // per replicate
    std::vector<double> c_index;  // per replicate
    [[nodiscard]] double mean_mse() const;
    [[nodiscard]] double mean_c_index() const;
};

struct ScenarioResult {
    ScenarioConfig scenario;
    double censoring_rate = 0.0;  // mean over replicates, training sets
    std::vector<MethodSummary> methods;

    [[nodiscard]] const MethodSummary& at(Method m) const;
};

[[nodiscard]] ScenarioResult run_scenario(const ScenarioConfig& scenario, const std::vector<Method>& methods,
                                          const FitSettings& settings, std::size_t replicates);

[[nodiscard]] std::vector<ScenarioResult> run_experiment(const ExperimentConfig& config);

}  // namespace deepraft
