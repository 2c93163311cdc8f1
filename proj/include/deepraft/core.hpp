#pragma once

// Shared data model for right-censored regression data.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepraft {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using EventVector = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Error categories
// ---------------------------------------------------------------------------

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyEventError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularDesignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Mixes a base seed and a stream index into an independent generator, so
/// replicate r of an experiment never shares a sequence with replicate r+1.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// SurvivalDataset
// ---------------------------------------------------------------------------

/// Observed times Y_i = min(T_i, C_i), event indicators Delta_i = I(T_i <= C_i)
/// and an n x p covariate matrix. Immutable after construction.
class SurvivalDataset {
public:
    SurvivalDataset(Vector observed_time, EventVector event, Matrix covariates);

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(time_.size()); }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }
    [[nodiscard]] std::size_t event_count() const noexcept { return event_count_; }

    [[nodiscard]] const Vector& observed_time() const noexcept { return time_; }
    [[nodiscard]] const EventVector& event() const noexcept { return event_; }
    [[nodiscard]] std::span<const std::uint8_t> events() const noexcept { return event_; }
    [[nodiscard]] const Matrix& covariates() const noexcept { return covariates_; }

    /// Rows selected by index, in the given order.
    [[nodiscard]] SurvivalDataset subset(std::span<const std::size_t> rows) const;

    /// Same subjects with a replacement covariate matrix (n rows required).
    [[nodiscard]] SurvivalDataset with_covariates(Matrix covariates) const;

private:
    Vector time_;
    EventVector event_;
    Matrix covariates_;
    std::size_t event_count_ = 0;
};

/// Throws EmptyEventError when the dataset has no observed failures.
void require_events(const SurvivalDataset& data, const char* context);

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

class ResidualVector {
public:
    explicit ResidualVector(Vector values);

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    [[nodiscard]] const Vector& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const double> span() const noexcept {
        return {values_.data(), static_cast<std::size_t>(values_.size())};
    }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

private:
    Vector values_;
};

[[nodiscard]] Vector log_times(const SurvivalDataset& data);

/// e_i = log Y_i - prediction_i.
[[nodiscard]] ResidualVector residuals(const SurvivalDataset& data, const Vector& predictions);

// ---------------------------------------------------------------------------
// Location recovery
// ---------------------------------------------------------------------------

/// Rank losses depend on residuals only through pairwise differences, so the
/// location of the mean function has to be fixed separately.
enum class CenteringMethod {
    event_mean,    ///< mean of residuals over subjects with an observed failure
    kaplan_meier,  ///< mean of the Kaplan-Meier residual distribution
};

/// Offset c such that prediction + c estimates E[log T | x]. Residuals are
/// log Y_i - prediction_i on the training data.
[[nodiscard]] double location_offset(const ResidualVector& res, std::span<const std::uint8_t> events,
                                     CenteringMethod method);

[[nodiscard]] CenteringMethod parse_centering(const std::string& name);
[[nodiscard]] std::string to_string(CenteringMethod method);

}  // namespace deepraft
