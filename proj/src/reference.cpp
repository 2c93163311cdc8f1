#include "deepraft/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace deepraft::reference {

double full_gehan_loss(std::span<const double> res, std::span<const std::uint8_t> events) {
    if (res.size() != events.size()) throw DimensionError("reference::full_gehan_loss: length mismatch");
    const std::size_t n = res.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !events[i]) continue;
            const double a = res[i] - res[j];
            total += a < 0.0 ? -a : 0.0;
        }
    }
    return total;
}

Vector gehan_subgradient(std::span<const double> res, std::span<const std::uint8_t> events) {
    if (res.size() != events.size()) throw DimensionError("reference::gehan_subgradient: length mismatch");
    const std::size_t n = res.size();
    Vector g = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            // term e_j - e_i active: +1 on prediction i, -1 on prediction j
            if (res[j] > res[i]) {
                g[static_cast<Eigen::Index>(i)] += 1.0;
                g[static_cast<Eigen::Index>(j)] -= 1.0;
            }
        }
    }
    return g;
}

Vector smoothed_estimating_function(const Vector& slopes, const SurvivalDataset& data, bool root_bandwidth,
                                    double bandwidth_scale) {
    if (static_cast<std::size_t>(slopes.size()) != data.p()) {
        throw DimensionError("reference::smoothed_estimating_function: slope length mismatch");
    }
    const std::size_t n = data.n();
    const Matrix& x = data.covariates();
    const Vector e = log_times(data) - x * slopes;
    Vector out = Vector::Zero(slopes.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!data.event()[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const Vector diff = (x.row(ii) - x.row(jj)).transpose();
            const double q = diff.squaredNorm() / static_cast<double>(n);
            const double r = bandwidth_scale * (root_bandwidth ? std::sqrt(q) : q);
            const double a = e[jj] - e[ii];
            double weight = 0.0;
            if (r > 0.0) {
                weight = 0.5 * std::erfc(-a / (r * std::sqrt(2.0)));
            } else {
                weight = a > 0.0 ? 1.0 : (a == 0.0 ? 0.5 : 0.0);
            }
            out += weight * diff;
        }
    }
    return out;
}

ConcordanceCounts concordance_counts(std::span<const double> time, std::span<const std::uint8_t> events,
                                     std::span<const double> predicted) {
    if (time.size() != events.size() || time.size() != predicted.size()) {
        throw DimensionError("reference::concordance_counts: length mismatch");
    }
    ConcordanceCounts counts;
    const std::size_t n = time.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !events[i] || !(time[i] < time[j])) continue;
            ++counts.comparable;
            if (predicted[i] < predicted[j]) ++counts.concordant;
        }
    }
    return counts;
}

}  // namespace deepraft::reference
