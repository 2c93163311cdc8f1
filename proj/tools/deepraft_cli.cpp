// deepraft: simulate, fit, evaluate, bench and bias-variance subcommands.
// Every experiment config key is also a flag (--learning_rate or
// --learning-rate); flags override values read from --config.

#include "deepraft/bench.hpp"
#include "deepraft/experiment.hpp"
#include "deepraft/io.hpp"
#include "deepraft/metrics.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

using namespace deepraft;

namespace {

struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
};

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

/// Registers --<key> for every config key, or only those in `only`.
void add_config_flags(CLI::App* app, ConfigFlags& flags, const std::vector<std::string>& only = {},
                      const std::vector<std::string>& skip = {}) {
    app->add_option("--config", flags.config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
        if (!only.empty() && std::find(only.begin(), only.end(), key.name) == only.end()) continue;
        if (std::find(skip.begin(), skip.end(), key.name) != skip.end()) continue;
        std::string names = "--" + key.name;
        if (dashed(key.name) != key.name) names += ",--" + dashed(key.name);
        app->add_option_function<std::string>(
            names, [&flags, name = key.name](const std::string& v) { flags.values[name] = v; }, key.help);
    }
}

ExperimentConfig build_config(const ConfigFlags& flags) {
    ExperimentConfig config = flags.config_path.empty() ? ExperimentConfig{} : load_experiment_config(flags.config_path);
    for (const auto& [key, value] : flags.values) set_config_value(config, key, value);
    config.train.validate();
    return config;
}

const std::vector<std::string> kTrainingKeys{"architecture",      "optimizer",        "learning_rate",
                                             "momentum",          "nesterov",         "decay",
                                             "adam_beta1",        "adam_beta2",       "adam_epsilon",
                                             "batch_size",        "epochs",           "l2_weight_penalty",
                                             "activity_penalty",  "average_rank_term", "pairs_per_event",
                                             "train_seed",        "centering",        "bandwidth",
                                             "bandwidth_scale"};

ResultFormat parse_format(const std::string& s) {
    if (s == "csv") return ResultFormat::csv;
    if (s == "text") return ResultFormat::text;
    throw std::invalid_argument("format must be csv or text");
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

struct DataFlags {
    std::string path;
    std::string schema;
    std::string time_column = "time";
    std::string event_column = "event";

    void add(CLI::App* app) {
        app->add_option("--data", path, "CSV file")->required()->check(CLI::ExistingFile);
        app->add_option("--schema", schema, "column spec file (default: all non time/event columns)")
            ->check(CLI::ExistingFile);
        app->add_option("--time-column", time_column, "time column when no schema is given");
        app->add_option("--event-column", event_column, "event column when no schema is given");
    }

    [[nodiscard]] ColumnSpec spec() const {
        return schema.empty() ? infer_column_spec(path, time_column, event_column) : load_column_spec(schema);
    }
};

bool has_column(const std::string& path, const std::string& name) {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    std::string cell;
    std::stringstream ss(header);
    while (std::getline(ss, cell, ',')) {
        if (cell == name || cell == "\"" + name + "\"") return true;
    }
    return false;
}

void report_load(const LoadedDataset& loaded) {
    std::fprintf(stderr, "loaded %zu of %zu rows (%zu missing, %zu non-positive time), p = %zu, events = %zu\n",
                 loaded.data.n(), loaded.raw_rows, loaded.dropped_missing, loaded.dropped_nonpositive_time,
                 loaded.data.p(), loaded.data.event_count());
}

// ---------------------------------------------------------------------------

int run_simulate(const ConfigFlags& flags, const std::string& output, const std::string& format,
                 const std::string& save_config) {
    const ExperimentConfig config = build_config(flags);
    if (!save_config.empty()) write_or_print(save_config, format_experiment_config(config));
    const auto results = run_experiment(config);
    for (const auto& r : results) {
        std::fprintf(stderr, "%s/%s tau=%g n=%zu K=%zu: training censoring %.3f\n", to_string(r.scenario.mean_kind).c_str(),
                     to_string(r.scenario.error_dist).c_str(), r.scenario.tau, r.scenario.n_train,
                     r.scenario.noise_dims, r.censoring_rate);
    }
    const ResultMetadata meta{config_hash(config), config.seed, config.replicates};
    write_or_print(output, format_results(results, parse_format(format), meta));
    return 0;
}

int run_generate(const ScenarioConfig& cfg, std::size_t n, std::uint64_t stream, const std::string& output) {
    Rng rng = make_stream(cfg.seed, stream);
    const SimulatedData sim = gen_dataset(cfg, n, rng);
    write_dataset_csv(output, sim.data, {}, sim.true_mean);
    std::fprintf(stderr, "wrote %zu rows, censoring %.3f\n", sim.data.n(),
                 1.0 - static_cast<double>(sim.data.event_count()) / static_cast<double>(sim.data.n()));
    return 0;
}

int run_fit(const ConfigFlags& flags, const DataFlags& data_flags, const std::string& method_name,
            const std::string& model_path, bool standardize, double holdout, std::uint64_t split_seed,
            std::size_t log_every) {
    const ExperimentConfig config = build_config(flags);
    const Method method = parse_method(method_name);
    const bool with_target = has_column(data_flags.path, "true_mean");
    LoadOptions load;
    load.standardize = standardize && holdout <= 0.0;
    if (with_target) load.target_column = "true_mean";
    const LoadedDataset loaded = load_csv(data_flags.path, data_flags.spec(), load);
    report_load(loaded);

    SurvivalDataset train = loaded.data;
    std::optional<SurvivalDataset> test;
    std::optional<Vector> test_target;
    Standardizer standardizer = loaded.standardizer;
    if (holdout > 0.0) {
        const TrainTestSplit split = split_train_test(loaded.data, 1.0 - holdout, split_seed,
                                                      standardize ? loaded.continuous_columns
                                                                  : std::vector<std::size_t>{});
        train = split.train;
        test = split.test;
        standardizer = split.standardizer;
        if (loaded.target) {
            Vector y(static_cast<Eigen::Index>(split.test_rows.size()));
            for (std::size_t k = 0; k < split.test_rows.size(); ++k) {
                y[static_cast<Eigen::Index>(k)] = (*loaded.target)[static_cast<Eigen::Index>(split.test_rows[k])];
            }
            test_target = std::move(y);
        }
        std::fprintf(stderr, "split: %zu train / %zu test rows\n", train.n(), test->n());
    }

    ScenarioConfig scenario;
    scenario.n_train = train.n();
    FitSettings settings = resolve_fit_settings(config, scenario);
    NetworkParams params;
    if (method == Method::deepr && log_every > 0) {
        params = deepraft::train(train, settings.layers, settings.train, [&](std::size_t epoch, const LossBreakdown& l) {
            if ((epoch + 1) % log_every == 0) {
                std::fprintf(stderr, "epoch %zu loss %.6g (rank %.6g, weights %.6g, activity %.6g)\n", epoch + 1,
                             l.total, l.rank, l.weight_penalty, l.activity_penalty);
            }
        });
        const Vector fitted = predict(params, train.covariates());
        shift_output(params, location_offset(residuals(train, fitted), train.events(), settings.centering));
    } else {
        params = fit_model(method, train, settings);
    }
    std::fprintf(stderr, "%s: %zu parameters, training C-index %.4f\n", display_name(method).c_str(),
                 params.parameter_count(), c_index(train, predict(params, train.covariates())));
    if (test) {
        const Vector pred = predict(params, test->covariates());
        std::printf("test_c_index %.6f\n", c_index(*test, pred));
        if (test_target) std::printf("test_mse %.6f\n", mse(pred, *test_target));
    }
    save_model(model_path, {params, standardizer, to_string(method)});
    std::fprintf(stderr, "model written to %s\n", model_path.c_str());
    return 0;
}

int run_evaluate(const DataFlags& data_flags, const std::string& model_path, const std::string& predictions_path) {
    const ModelFile model = load_model(model_path);
    LoadOptions load;
    if (has_column(data_flags.path, "true_mean")) load.target_column = "true_mean";
    const LoadedDataset loaded = load_csv(data_flags.path, data_flags.spec(), load);
    report_load(loaded);
    if (loaded.data.p() != model.params.input_dim) {
        throw DimensionError("evaluate: data has " + std::to_string(loaded.data.p()) + " covariates, model expects " +
                             std::to_string(model.params.input_dim));
    }
    const SurvivalDataset data = model.standardizer.empty() ? loaded.data : model.standardizer.apply(loaded.data);
    const Vector pred = predict(model.params, data.covariates());
    std::printf("n %zu\nevents %zu\nc_index %.6f\n", data.n(), data.event_count(), c_index(data, pred));
    if (loaded.target) std::printf("mse %.6f\n", mse(pred, *loaded.target));
    if (!predictions_path.empty()) {
        std::ofstream out(predictions_path);
        if (!out) throw std::runtime_error("cannot write " + predictions_path);
        out << "predicted_log_time\n";
        char buf[32];
        for (const double v : pred) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
    }
    return 0;
}

int run_bench(const std::vector<std::size_t>& sizes, const SweepOptions& opts, std::uint64_t seed,
              const std::string& format, const std::string& output) {
    Rng rng = make_stream(seed, 0);
    const TimingTable table = loss_timing_sweep(sizes, opts, rng);
    write_or_print(output, format_timing_table(table, parse_format(format)));
    return 0;
}

int run_bias_variance(const ConfigFlags& flags, const std::string& mean_kind, std::size_t replicates,
                      std::uint64_t seed, std::size_t n_train, std::size_t n_test, const std::string& methods,
                      const std::string& output) {
    const ExperimentConfig config = build_config(flags);
    ScenarioConfig cfg = bias_variance_defaults(parse_mean_kind(mean_kind), seed);
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    const FitSettings settings = resolve_fit_settings(config, cfg);

    std::vector<NamedFitter> fitters;
    std::stringstream list(methods);
    std::string item;
    while (std::getline(list, item, ',')) {
        const Method m = parse_method(item);
        fitters.push_back({display_name(m), [m, settings](const SurvivalDataset& train, const Matrix& test_x,
                                                          std::uint64_t fit_seed) {
                               FitSettings local = settings;
                               local.train.seed = fit_seed;
                               return predict(fit_model(m, train, local), test_x);
                           }});
    }
    const BiasVarianceResult result = bias_variance_protocol(cfg, replicates, fitters);
    std::printf("%-10s %14s %14s %14s %14s %14s\n", "method", "sq_bias", "sd(sq_bias)", "variance", "sd(variance)",
                "mse");
    for (const auto& f : result.fitters) {
        std::printf("%-10s %14.6f %14.6f %14.6f %14.6f %14.6f\n", f.name.c_str(), f.mean_squared_bias,
                    f.sd_squared_bias, f.mean_variance, f.sd_variance, f.mean_mse);
    }
    if (!output.empty()) {
        std::ofstream out(output);
        if (!out) throw std::runtime_error("cannot write " + output);
        out << "point,true_mean";
        for (const auto& f : result.fitters) out << ',' << f.name << ":sq_bias," << f.name << ":variance";
        out << '\n';
        char buf[48];
        for (Eigen::Index k = 0; k < result.true_mean.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", result.true_mean[k]);
            out << k << ',' << buf;
            for (const auto& f : result.fitters) {
                std::snprintf(buf, sizeof buf, ",%.17g", f.squared_bias[k]);
                out << buf;
                std::snprintf(buf, sizeof buf, ",%.17g", f.variance[k]);
                out << buf;
            }
            out << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep rank-based AFT survival regression"};
    app.require_subcommand(1);

    // simulate
    ConfigFlags sim_flags;
    std::string sim_output, sim_format = "text", sim_save_config;
    auto* simulate = app.add_subcommand("simulate", "run a scenario grid and report MSE / C-index tables");
    add_config_flags(simulate, sim_flags);
    simulate->get_option("--seed")->required();
    simulate->add_option("--output,-o", sim_output, "results file (default stdout)");
    simulate->add_option("--format", sim_format, "csv or text")->check(CLI::IsMember({"csv", "text"}));
    simulate->add_option("--save-config", sim_save_config, "write the resolved config here");

    // generate
    ScenarioConfig gen_cfg;
    std::string gen_kind = "interaction", gen_dist = "gaussian", gen_output;
    std::size_t gen_n = 1000;
    std::uint64_t gen_stream = 0;
    auto* generate = app.add_subcommand("generate", "write one simulated dataset (with its true mean) as CSV");
    generate->add_option("--seed", gen_cfg.seed, "random seed")->required();
    generate->add_option("--mean-kind,--mean_kind", gen_kind, "interaction, gam or linear");
    generate->add_option("--error-dist,--error_dist", gen_dist, "gaussian, gumbel, laplace or t3");
    generate->add_option("--tau", gen_cfg.tau, "censoring scale");
    generate->add_option("--n", gen_n, "rows");
    generate->add_option("--noise-dims,--noise_dims", gen_cfg.noise_dims, "pure-noise covariates");
    generate->add_option("--stream", gen_stream, "random stream within the seed");
    generate->add_option("--output,-o", gen_output, "CSV path")->required();

    // fit
    ConfigFlags fit_flags;
    DataFlags fit_data;
    std::string fit_method = "deepr", fit_model_path;
    bool fit_standardize = false;
    double fit_holdout = 0.0;
    std::uint64_t fit_split_seed = 0;
    std::size_t fit_log_every = 0;
    auto* fit = app.add_subcommand("fit", "fit DeepR-AFT, PAFT or SAFT on a CSV and save the model");
    fit_data.add(fit);
    add_config_flags(fit, fit_flags, kTrainingKeys);
    fit->add_option("--method", fit_method, "deepr, paft or saft");
    fit->add_option("--model,-o", fit_model_path, "model output path")->required();
    fit->add_flag("--standardize", fit_standardize, "standardize continuous covariates (train statistics)");
    fit->add_option("--holdout", fit_holdout, "fraction held out for testing (0 = none)")->check(CLI::Range(0.0, 0.99));
    fit->add_option("--split-seed,--split_seed", fit_split_seed, "seed of the train/test split");
    fit->add_option("--log-every", fit_log_every, "print the epoch loss every k epochs (deepr)");

    // evaluate
    DataFlags eval_data;
    std::string eval_model, eval_predictions;
    auto* evaluate = app.add_subcommand("evaluate", "C-index (and MSE against true_mean) of a saved model");
    eval_data.add(evaluate);
    evaluate->add_option("--model,-m", eval_model, "model file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--predictions", eval_predictions, "write predicted log times here");

    // bench
    std::vector<std::size_t> bench_sizes{1000, 2000, 4000, 8000};
    SweepOptions bench_opts;
    std::uint64_t bench_seed = 0;
    std::string bench_format = "text", bench_output, bench_kernel = "parallel";
    auto* bench = app.add_subcommand("bench", "full vs sub-sampled Gehan loss timing sweep");
    bench->add_option("--sizes", bench_sizes, "ascending sample sizes")->delimiter(',');
    bench->add_option("--pairs-per-event,--pairs_per_event", bench_opts.pairs_per_event, "s");
    bench->add_option("--repetitions", bench_opts.timing.repetitions, "timed samples (>= 3)");
    bench->add_option("--min-sample-seconds", bench_opts.timing.min_sample_seconds, "minimum length of one sample");
    bench->add_option("--threads", bench_opts.threads, "OpenMP threads while timing");
    bench->add_option("--kernel", bench_kernel, "parallel or serial full-loss kernel")
        ->check(CLI::IsMember({"parallel", "serial"}));
    bench->add_option("--seed", bench_seed, "random seed");
    bench->add_option("--format", bench_format, "csv or text")->check(CLI::IsMember({"csv", "text"}));
    bench->add_option("--output,-o", bench_output, "output file (default stdout)");

    // bias-variance
    ConfigFlags bv_flags;
    std::string bv_kind = "interaction", bv_methods = "deepr,saft", bv_output;
    std::size_t bv_replicates = 10, bv_n_train = 3000, bv_n_test = 2000;
    std::uint64_t bv_seed = 0;
    auto* bv = app.add_subcommand("bias-variance", "pointwise squared bias and variance over replicated training sets");
    add_config_flags(bv, bv_flags, kTrainingKeys);
    bv->add_option("--mean-kind,--mean_kind", bv_kind, "interaction, gam or linear");
    bv->add_option("--replicates", bv_replicates, "training-set replicates R");
    bv->add_option("--seed", bv_seed, "random seed");
    bv->add_option("--n-train,--n_train", bv_n_train, "training size");
    bv->add_option("--n-test,--n_test", bv_n_test, "evaluation points");
    bv->add_option("--methods", bv_methods, "comma list of deepr, paft, saft");
    bv->add_option("--output,-o", bv_output, "per-point CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return run_simulate(sim_flags, sim_output, sim_format, sim_save_config);
        if (*generate) {
            gen_cfg.mean_kind = parse_mean_kind(gen_kind);
            gen_cfg.error_dist = parse_error_dist(gen_dist);
            return run_generate(gen_cfg, gen_n, gen_stream, gen_output);
        }
        if (*fit) {
            return run_fit(fit_flags, fit_data, fit_method, fit_model_path, fit_standardize, fit_holdout,
                           fit_split_seed, fit_log_every);
        }
        if (*evaluate) return run_evaluate(eval_data, eval_model, eval_predictions);
        if (*bench) {
            bench_opts.kernel = bench_kernel == "serial" ? LossKernel::serial : LossKernel::parallel;
            return run_bench(bench_sizes, bench_opts, bench_seed, bench_format, bench_output);
        }
        if (*bv) {
            return run_bias_variance(bv_flags, bv_kind, bv_replicates, bv_seed, bv_n_train, bv_n_test, bv_methods,
                                     bv_output);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
