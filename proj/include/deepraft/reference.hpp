#pragma once

// Serial reference kernels. They are written as the literal double sums and
// kept so the OpenMP kernels in gehan, baselines and metrics can be checked
// against them and benchmarked.

#include "deepraft/core.hpp"

#include <cstdint>
#include <span>

namespace deepraft::reference {

double full_gehan_loss(std::span<const double> res, std::span<const std::uint8_t> events);

Vector gehan_subgradient(std::span<const double> res, std::span<const std::uint8_t> events);

/// sum_i sum_j Delta_i (x_i - x_j) Phi{(e_j - e_i) / r_ij}, r_ij = scale * q_ij
/// or scale * sqrt(q_ij) with q_ij = |x_i - x_j|^2 / n.
Vector smoothed_estimating_function(const Vector& slopes, const SurvivalDataset& data, bool root_bandwidth,
                                    double bandwidth_scale);

/// Counts behind the C-index as defined by strict inequalities on both time and
/// prediction.
struct ConcordanceCounts {
    std::uint64_t concordant = 0;
    std::uint64_t comparable = 0;
};

ConcordanceCounts concordance_counts(std::span<const double> time, std::span<const std::uint8_t> events,
                                     std::span<const double> predicted);

}  // namespace deepraft::reference
