#pragma once

// Gehan rank loss sum_i sum_j Delta_i [e_i - e_j]^-, its subgradient and the
// pair sub-sampling used to train on O(n s) pairs instead of O(n^2).

#include "deepraft/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace deepraft {

/// [a]^- = |min(a, 0)|.
[[nodiscard]] inline double negative_part(double a) noexcept { return a < 0.0 ? -a : 0.0; }

/// An ordered pair anchored on an observed failure i, compared against j != i.
struct ResidualPair {
    std::uint32_t i = 0;
    std::uint32_t j = 0;

    friend bool operator==(const ResidualPair&, const ResidualPair&) = default;
};

struct PairSample {
    std::vector<ResidualPair> pairs;
    std::size_t pairs_per_event = 0;  // s
    std::size_t source_n = 0;
};

/// Exact O(n^2) double sum over all ordered pairs, OpenMP-parallel over i.
[[nodiscard]] double full_gehan_loss(const ResidualVector& res, std::span<const std::uint8_t> events);

/// Subgradient of full_gehan_loss with respect to the prediction vector
/// (d loss / d prediction = -d loss / d e). Ties contribute 0.
[[nodiscard]] Vector gehan_subgradient(const ResidualVector& res, std::span<const std::uint8_t> events);

/// For every failure i, s partners drawn uniformly without replacement from
/// the n-1 other subjects.
[[nodiscard]] PairSample subsample_pairs(const SurvivalDataset& data, std::size_t s, Rng& rng);

/// Sum over the batch of [e_i - e_j]^-.
[[nodiscard]] double minibatch_loss(const ResidualVector& res, std::span<const ResidualPair> batch);

/// Shuffles the pairs in place and returns consecutive views of at most
/// batch_size pairs; the final short block is kept.
std::vector<std::span<const ResidualPair>> shuffle_into_batches(std::vector<ResidualPair>& pairs,
                                                                std::size_t batch_size, Rng& rng);

/// Every ordered pair (i, j), i != j, with Delta_i = 1.
[[nodiscard]] std::vector<ResidualPair> all_event_pairs(std::span<const std::uint8_t> events);

}  // namespace deepraft
