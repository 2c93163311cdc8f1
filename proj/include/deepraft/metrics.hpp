#pragma once

#include "deepraft/core.hpp"
#include "deepraft/reference.hpp"

#include <span>

namespace deepraft {

/// (1/n) sum (predicted_i - truth_i)^2.
[[nodiscard]] double mse(const Vector& predicted, const Vector& truth);

/// Pairs with Delta_i = 1 and Y_i < Y_j form the denominator; the numerator
/// counts those with predicted_i < predicted_j. Ties in either time or
/// prediction earn no credit.
[[nodiscard]] reference::ConcordanceCounts concordance_counts(std::span<const double> time,
                                                              std::span<const std::uint8_t> events,
                                                              std::span<const double> predicted);

[[nodiscard]] double c_index(const Vector& observed_time, std::span<const std::uint8_t> events,
                             const Vector& predicted);

[[nodiscard]] inline double c_index(const SurvivalDataset& data, const Vector& predicted) {
    return c_index(data.observed_time(), data.events(), predicted);
}

}  // namespace deepraft
