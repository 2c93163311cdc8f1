#pragma once

// Dataset CSV ingestion, experiment config files, model persistence and
// result tables.

#include "deepraft/core.hpp"
#include "deepraft/experiment.hpp"
#include "deepraft/net.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace deepraft {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct ColumnSpec {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> covariate_columns;
    /// column -> level ordering; the first level is the dropped reference.
    std::map<std::string, std::vector<std::string>> categorical;

    void validate() const;
};

/// Reads a ColumnSpec from a key = value file with keys time, event,
/// covariates (comma list) and categorical.<column> (comma list of levels).
[[nodiscard]] ColumnSpec load_column_spec(const std::filesystem::path& path);

/// Per-column affine transform (x - mean) / sd applied to selected columns.
struct Standardizer {
    std::vector<std::size_t> columns;
    std::vector<double> mean;
    std::vector<double> sd;

    [[nodiscard]] bool empty() const noexcept { return columns.empty(); }
    [[nodiscard]] Matrix apply(const Matrix& x) const;
    [[nodiscard]] SurvivalDataset apply(const SurvivalDataset& data) const;
};

/// Means and (population) standard deviations computed on data; columns with
/// zero spread keep sd = 1.
[[nodiscard]] Standardizer fit_standardizer(const Matrix& x, const std::vector<std::size_t>& columns);

struct LoadOptions {
    bool standardize = false;
    /// Optional numeric column returned separately (e.g. the simulated true
    /// mean); rows missing it are dropped like any other missing value.
    std::string target_column;
};

struct LoadedDataset {
    SurvivalDataset data;
    std::vector<std::string> covariate_names;  // after one-hot expansion
    std::vector<std::size_t> continuous_columns;
    Standardizer standardizer;                 // empty unless standardize was requested
    std::optional<Vector> target;              // set when LoadOptions::target_column is given
    std::size_t raw_rows = 0;
    std::size_t dropped_nonpositive_time = 0;
    std::size_t dropped_missing = 0;

    [[nodiscard]] std::size_t dropped() const noexcept { return dropped_nonpositive_time + dropped_missing; }
};

[[nodiscard]] LoadedDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec,
                                     const LoadOptions& options = {});

/// Writes time,event,x1..xp (or the given names) with round-trip precision.
void write_dataset_csv(const std::filesystem::path& path, const SurvivalDataset& data,
                       const std::vector<std::string>& covariate_names = {},
                       const std::optional<Vector>& true_mean = std::nullopt);

/// ColumnSpec matching write_dataset_csv's default header.
[[nodiscard]] ColumnSpec default_column_spec(std::size_t p);

/// Spec built from a CSV header: the named time and event columns plus every
/// other column except those listed in exclude, all continuous.
[[nodiscard]] ColumnSpec infer_column_spec(const std::filesystem::path& path, const std::string& time_column = "time",
                                           const std::string& event_column = "event",
                                           const std::vector<std::string>& exclude = {"true_mean"});

struct TrainTestSplit {
    SurvivalDataset train;
    SurvivalDataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    Standardizer standardizer;  // fit on train, applied to both
    std::size_t attempts = 1;
};

/// Uniform split with round(fraction * n) training rows. Splits whose training
/// part has no events are redrawn, up to 10 attempts.
[[nodiscard]] TrainTestSplit split_train_test(const SurvivalDataset& data, double fraction, std::uint64_t seed,
                                              const std::vector<std::size_t>& standardize_columns = {});

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

/// Flat key = value text; '#' starts a comment. Unknown keys are rejected.
[[nodiscard]] ExperimentConfig parse_experiment_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);
[[nodiscard]] std::string format_experiment_config(const ExperimentConfig& config);

/// Applies one key = value assignment to the config (shared by files and CLI
/// flags).
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

struct ConfigKey {
    std::string name;
    std::string help;
};

/// Every key accepted by set_config_value, in canonical order.
[[nodiscard]] const std::vector<ConfigKey>& config_keys();

/// FNV-1a of the canonical config text, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Text header with shapes followed by little-endian float64 weights (row
/// major, out x in) and biases, layer by layer.
struct ModelFile {
    NetworkParams params;
    Standardizer standardizer;
    std::string method;  // informational
};

inline constexpr int kModelFormatVersion = 1;

void save_model(const std::filesystem::path& path, const ModelFile& model);
[[nodiscard]] ModelFile load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

enum class ResultFormat { csv, text };

struct ResultMetadata {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t replicates = 0;
};

/// Rows are (mean kind, error law, tau); columns are method x n_train, each
/// with an MSE and a C-index cell.
void emit_results(const std::filesystem::path& path, const std::vector<ScenarioResult>& results,
                  ResultFormat format, const ResultMetadata& meta = {});
[[nodiscard]] std::string format_results(const std::vector<ScenarioResult>& results, ResultFormat format,
                                         const ResultMetadata& meta = {});

/// One parsed row of an emitted results CSV.
struct ResultRow {
    std::string mean_kind;
    std::string error_dist;
    double tau = 0.0;
    std::map<std::string, double> cells;  // column name -> value
};

struct ParsedResults {
    std::vector<std::string> header;
    std::vector<ResultRow> rows;
    std::map<std::string, std::string> metadata;
};

[[nodiscard]] ParsedResults parse_results_csv(const std::string& text);

}  // namespace deepraft
