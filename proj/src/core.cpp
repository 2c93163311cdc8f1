#include "deepraft/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace deepraft {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                      static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state))};
    return Rng(seq);
}

SurvivalDataset::SurvivalDataset(Vector observed_time, EventVector event, Matrix covariates)
    : time_(std::move(observed_time)), event_(std::move(event)), covariates_(std::move(covariates)) {
    const auto n = static_cast<std::size_t>(time_.size());
    if (event_.size() != n) {
        throw DimensionError("SurvivalDataset: event vector has " + std::to_string(event_.size()) +
                             " entries, expected " + std::to_string(n));
    }
    if (static_cast<std::size_t>(covariates_.rows()) != n) {
        throw DimensionError("SurvivalDataset: covariate matrix has " + std::to_string(covariates_.rows()) +
                             " rows, expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double y = time_[static_cast<Eigen::Index>(i)];
        if (!(y > 0.0) || !std::isfinite(y)) {
            throw std::invalid_argument("SurvivalDataset: observed time at row " + std::to_string(i) +
                                        " must be finite and strictly positive");
        }
        if (event_[i] > 1) {
            throw std::invalid_argument("SurvivalDataset: event indicator must be 0 or 1");
        }
        event_count_ += event_[i];
    }
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Vector t(m);
    EventVector d(rows.size());
    Matrix x(m, covariates_.cols());
    for (Eigen::Index k = 0; k < m; ++k) {
        const std::size_t r = rows[static_cast<std::size_t>(k)];
        if (r >= n()) throw std::out_of_range("SurvivalDataset::subset: row index out of range");
        t[k] = time_[static_cast<Eigen::Index>(r)];
        d[static_cast<std::size_t>(k)] = event_[r];
        x.row(k) = covariates_.row(static_cast<Eigen::Index>(r));
    }
    return {std::move(t), std::move(d), std::move(x)};
}

SurvivalDataset SurvivalDataset::with_covariates(Matrix covariates) const {
    return {time_, event_, std::move(covariates)};
}

void require_events(const SurvivalDataset& data, const char* context) {
    if (data.event_count() == 0) {
        throw EmptyEventError(std::string(context) + ": dataset contains no observed failures");
    }
}

ResidualVector::ResidualVector(Vector values) : values_(std::move(values)) {
    if (!values_.allFinite()) throw std::invalid_argument("ResidualVector: non-finite residual");
}

Vector log_times(const SurvivalDataset& data) { return data.observed_time().array().log().matrix(); }

ResidualVector residuals(const SurvivalDataset& data, const Vector& predictions) {
    if (static_cast<std::size_t>(predictions.size()) != data.n()) {
        throw DimensionError("residuals: " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(data.n()) + " subjects");
    }
    return ResidualVector(log_times(data) - predictions);
}

double location_offset(const ResidualVector& res, std::span<const std::uint8_t> events, CenteringMethod method) {
    const std::size_t n = res.size();
    if (events.size() != n) throw DimensionError("location_offset: length mismatch");

    if (method == CenteringMethod::event_mean) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (events[i]) {
                sum += res[i];
                ++count;
            }
        }
        if (count == 0) throw EmptyEventError("location_offset: no events");
        return sum / static_cast<double>(count);
    }

    // Kaplan-Meier mean; failures sort ahead of censorings at equal values and
    // any mass left past the largest residual is placed on it.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (res[a] != res[b]) return res[a] < res[b];
        return events[a] > events[b];
    });
    bool any_event = false;
    double surv = 1.0;
    double mean = 0.0;
    std::size_t k = 0;
    while (k < n) {
        const double value = res[order[k]];
        std::size_t deaths = 0;
        std::size_t group_end = k;
        while (group_end < n && res[order[group_end]] == value) {
            deaths += events[order[group_end]];
            ++group_end;
        }
        const auto at_risk = static_cast<double>(n - k);
        if (deaths > 0) {
            any_event = true;
            const double next = surv * (1.0 - static_cast<double>(deaths) / at_risk);
            mean += value * (surv - next);
            surv = next;
        }
        if (group_end == n && surv > 0.0) mean += value * surv;
        k = group_end;
    }
    if (!any_event) throw EmptyEventError("location_offset: no events");
    return mean;
}

CenteringMethod parse_centering(const std::string& name) {
    if (name == "event_mean") return CenteringMethod::event_mean;
    if (name == "kaplan_meier" || name == "km") return CenteringMethod::kaplan_meier;
    throw std::invalid_argument("unknown centering method: " + name);
}

std::string to_string(CenteringMethod method) {
    return method == CenteringMethod::event_mean ? "event_mean" : "kaplan_meier";
}

}  // namespace deepraft
