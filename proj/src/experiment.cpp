#include "deepraft/experiment.hpp"

#include "deepraft/metrics.hpp"

#include <exception>
#include <numeric>
#include <stdexcept>

namespace deepraft {

std::string to_string(Method m) {
    switch (m) {
        case Method::deepr: return "deepr";
        case Method::paft: return "paft";
        case Method::saft: return "saft";
    }
    return "?";
}

std::string display_name(Method m) {
    switch (m) {
        case Method::deepr: return "DeepR-AFT";
        case Method::paft: return "PAFT";
        case Method::saft: return "SAFT";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "deepr" || name == "deepr-aft" || name == "DeepR-AFT") return Method::deepr;
    if (name == "paft" || name == "PAFT") return Method::paft;
    if (name == "saft" || name == "SAFT") return Method::saft;
    throw std::invalid_argument("unknown method: " + name);
}

std::vector<ScenarioConfig> ExperimentConfig::scenarios() const {
    std::vector<ScenarioConfig> out;
    for (const auto kind : mean_kinds) {
        for (const auto dist : error_dists) {
            for (const double tau : taus) {
                for (const auto n : n_trains) {
                    ScenarioConfig s;
                    s.mean_kind = kind;
                    s.error_dist = dist;
                    s.tau = tau;
                    s.n_train = n;
                    s.n_test = n_test;
                    s.noise_dims = noise_dims;
                    s.seed = seed;
                    out.push_back(s);
                }
            }
        }
    }
    return out;
}

FitSettings resolve_fit_settings(const ExperimentConfig& config, const ScenarioConfig& scenario) {
    FitSettings s;
    if (config.architecture == "auto") {
        s.layers = simulation_architecture(scenario.mean_kind == MeanKind::linear);
    } else if (config.architecture == "real") {
        s.layers = real_data_architecture();
    } else {
        s.layers = parse_architecture(config.architecture);
    }
    s.train = config.train;
    if (config.auto_learning_rate) {
        s.train.learning_rate = default_learning_rate(scenario.n_train, scenario.error_dist == ErrorDist::gumbel);
    }
    if (config.auto_pairs) s.train.pairs_per_event = default_pairs_per_event(scenario.n_train);
    s.centering = config.centering;
    s.smoothing = config.smoothing;
    return s;
}

NetworkParams linear_fit_as_network(const LinearAftFit& fit) {
    NetworkParams net;
    net.input_dim = static_cast<std::size_t>(fit.beta.size() - 1);
    DenseLayer layer;
    layer.weight = fit.slopes().transpose();
    layer.bias = Eigen::VectorXd::Constant(1, fit.intercept());
    layer.activation = Activation::linear;
    net.layers.push_back(std::move(layer));
    return net;
}

NetworkParams fit_model(Method method, const SurvivalDataset& train, const FitSettings& settings) {
    switch (method) {
        case Method::deepr: {
            NetworkParams net = deepraft::train(train, settings.layers, settings.train);
            const Vector fitted = predict(net, train.covariates());
            shift_output(net, location_offset(residuals(train, fitted), train.events(), settings.centering));
            return net;
        }
        case Method::paft: return linear_fit_as_network(fit_paft_lognormal(train));
        case Method::saft: {
            SaftOptions opts;
            opts.smoothing = settings.smoothing;
            opts.centering = settings.centering;
            return linear_fit_as_network(fit_saft_gehan(train, opts));
        }
    }
    throw std::invalid_argument("fit_model: unknown method");
}

double MethodSummary::mean_mse() const {
    return mse.empty() ? 0.0 : std::accumulate(mse.begin(), mse.end(), 0.0) / static_cast<double>(mse.size());
}

double MethodSummary::mean_c_index() const {
    return c_index.empty() ? 0.0
                           : std::accumulate(c_index.begin(), c_index.end(), 0.0) / static_cast<double>(c_index.size());
}

const MethodSummary& ScenarioResult::at(Method m) const {
    for (const auto& s : methods) {
        if (s.method == m) return s;
    }
    throw std::out_of_range("ScenarioResult: method " + to_string(m) + " not run");
}

ScenarioResult run_scenario(const ScenarioConfig& scenario, const std::vector<Method>& methods,
                            const FitSettings& settings, std::size_t replicates) {
    if (replicates == 0) throw std::invalid_argument("run_scenario: replicates must be positive");
    ScenarioResult result;
    result.scenario = scenario;
    for (const auto m : methods) {
        MethodSummary s;
        s.method = m;
        s.mse.assign(replicates, 0.0);
        s.c_index.assign(replicates, 0.0);
        result.methods.push_back(std::move(s));
    }
    std::vector<double> censoring(replicates, 0.0);
    std::exception_ptr failure;
    const auto R = static_cast<std::ptrdiff_t>(replicates);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < R; ++r) {
        try {
            const auto rep = static_cast<std::size_t>(r);
            const ScenarioSplit split = gen_scenario(scenario, rep);
            censoring[rep] = 1.0 - static_cast<double>(split.train.data.event_count()) /
                                       static_cast<double>(split.train.data.n());
            FitSettings local = settings;
            local.train.seed = settings.train.seed ^ (0x9E3779B97F4A7C15ULL * (scenario.seed + 1) + rep);
            for (std::size_t k = 0; k < methods.size(); ++k) {
                const NetworkParams model = fit_model(methods[k], split.train.data, local);
                const Vector pred = predict(model, split.test.data.covariates());
                result.methods[k].mse[rep] = mse(pred, split.test.true_mean);
                result.methods[k].c_index[rep] = c_index(split.test.data, pred);
            }
        } catch (...) {
#pragma omp critical(deepraft_run_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    result.censoring_rate = std::accumulate(censoring.begin(), censoring.end(), 0.0) / static_cast<double>(replicates);
    return result;
}

std::vector<ScenarioResult> run_experiment(const ExperimentConfig& config) {
    std::vector<ScenarioResult> out;
    for (const auto& scenario : config.scenarios()) {
        out.push_back(run_scenario(scenario, config.methods, resolve_fit_settings(config, scenario), config.replicates));
    }
    return out;
}

}  // namespace deepraft
