#include "deepraft/metrics.hpp"

#include <string>

namespace deepraft {

double mse(const Vector& predicted, const Vector& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("mse: " + std::to_string(predicted.size()) + " predictions vs " +
                             std::to_string(truth.size()) + " true values");
    }
    if (predicted.size() == 0) throw EmptyDataError("mse: empty input");
    return (predicted - truth).squaredNorm() / static_cast<double>(predicted.size());
}

reference::ConcordanceCounts concordance_counts(std::span<const double> time, std::span<const std::uint8_t> events,
                                                std::span<const double> predicted) {
    if (time.size() != events.size() || time.size() != predicted.size()) {
        throw DimensionError("c_index: time, event and prediction lengths differ");
    }
    const auto n = static_cast<std::ptrdiff_t>(time.size());
    const double* y = time.data();
    const double* f = predicted.data();
    const std::uint8_t* d = events.data();
    std::uint64_t concordant = 0;
    std::uint64_t comparable = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : concordant, comparable)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (!d[i]) continue;
        const double yi = y[i];
        const double fi = f[i];
        std::uint64_t row_conc = 0;
        std::uint64_t row_comp = 0;
        for (std::ptrdiff_t j = 0; j < n; ++j) {
            // yi < y[j] already excludes j == i
            if (yi < y[j]) {
                ++row_comp;
                row_conc += fi < f[j] ? 1u : 0u;
            }
        }
        concordant += row_conc;
        comparable += row_comp;
    }
    return {concordant, comparable};
}

double c_index(const Vector& observed_time, std::span<const std::uint8_t> events, const Vector& predicted) {
    const auto counts =
        concordance_counts({observed_time.data(), static_cast<std::size_t>(observed_time.size())}, events,
                           {predicted.data(), static_cast<std::size_t>(predicted.size())});
    if (counts.comparable == 0) throw UndefinedMetricError("c_index: no comparable pairs");
    return static_cast<double>(counts.concordant) / static_cast<double>(counts.comparable);
}

}  // namespace deepraft
