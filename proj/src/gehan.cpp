#include "deepraft/gehan.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace deepraft {

namespace {

void check_lengths(const ResidualVector& res, std::span<const std::uint8_t> events, const char* what) {
    if (res.size() != events.size()) {
        throw DimensionError(std::string(what) + ": " + std::to_string(res.size()) + " residuals but " +
                             std::to_string(events.size()) + " event indicators");
    }
}

}  // namespace

double full_gehan_loss(const ResidualVector& res, std::span<const std::uint8_t> events) {
    check_lengths(res, events, "full_gehan_loss");
    const auto n = static_cast<std::ptrdiff_t>(res.size());
    const double* e = res.values().data();
    const std::uint8_t* d = events.data();
    double total = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : total)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (!d[i]) continue;
        const double ei = e[i];
        // two sweeps around the diagonal keep j != i explicit
        double row = 0.0;
        for (std::ptrdiff_t j = 0; j < i; ++j) row += std::max(0.0, e[j] - ei);
        for (std::ptrdiff_t j = i + 1; j < n; ++j) row += std::max(0.0, e[j] - ei);
        total += row;
    }
    return total;
}

Vector gehan_subgradient(const ResidualVector& res, std::span<const std::uint8_t> events) {
    check_lengths(res, events, "gehan_subgradient");
    const auto n = static_cast<std::ptrdiff_t>(res.size());
    const double* e = res.values().data();
    const std::uint8_t* d = events.data();
    Vector g(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        // strict comparisons leave j == k out of both counts
        const double ek = e[k];
        std::int64_t above = 0;
        std::int64_t below_events = 0;
        for (std::ptrdiff_t j = 0; j < n; ++j) {
            above += e[j] > ek;
            below_events += d[j] & static_cast<std::uint8_t>(ek > e[j]);
        }
        g[k] = static_cast<double>((d[k] ? above : 0) - below_events);
    }
    return g;
}

PairSample subsample_pairs(const SurvivalDataset& data, std::size_t s, Rng& rng) {
    const std::size_t n = data.n();
    require_events(data, "subsample_pairs");
    if (s == 0) throw std::invalid_argument("subsample_pairs: s must be positive");
    if (s > n - 1) {
        throw std::invalid_argument("subsample_pairs: s = " + std::to_string(s) + " exceeds n - 1 = " +
                                    std::to_string(n - 1));
    }
    if (n > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("subsample_pairs: n too large");

    PairSample sample;
    sample.pairs_per_event = s;
    sample.source_n = n;
    sample.pairs.reserve(data.event_count() * s);

    // Partial Fisher-Yates over the n-1 candidate slots; the swaps are undone
    // afterwards so the scratch array is the identity for the next subject.
    std::vector<std::uint32_t> slots(n - 1);
    std::iota(slots.begin(), slots.end(), std::uint32_t{0});
    std::vector<std::size_t> swapped(s);
    const auto& events = data.event();
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t t = 0; t < s; ++t) {
            std::uniform_int_distribution<std::size_t> pick(t, n - 2);
            const std::size_t r = pick(rng);
            std::swap(slots[t], slots[r]);
            swapped[t] = r;
            const std::uint32_t slot = slots[t];
            const std::uint32_t j = slot < i ? slot : slot + 1;
            sample.pairs.push_back({static_cast<std::uint32_t>(i), j});
        }
        for (std::size_t t = s; t-- > 0;) std::swap(slots[t], slots[swapped[t]]);
    }
    return sample;
}

double minibatch_loss(const ResidualVector& res, std::span<const ResidualPair> batch) {
    // Indices are validated in a separate pass so the summation loop stays
    // branch-free; four accumulators keep the random gathers overlapped.
    std::uint32_t largest = 0;
    for (const auto& pair : batch) largest = std::max(largest, std::max(pair.i, pair.j));
    if (!batch.empty() && largest >= res.size()) throw std::out_of_range("minibatch_loss: pair index out of range");
    const double* e = res.values().data();
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t m = batch.size();
    std::size_t k = 0;
    for (; k + 4 <= m; k += 4) {
        for (std::size_t u = 0; u < 4; ++u) acc[u] += std::max(0.0, e[batch[k + u].j] - e[batch[k + u].i]);
    }
    for (; k < m; ++k) acc[0] += std::max(0.0, e[batch[k].j] - e[batch[k].i]);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

std::vector<std::span<const ResidualPair>> shuffle_into_batches(std::vector<ResidualPair>& pairs,
                                                                std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("shuffle_into_batches: batch size must be positive");
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::vector<std::span<const ResidualPair>> batches;
    batches.reserve((pairs.size() + batch_size - 1) / batch_size);
    const std::span<const ResidualPair> all(pairs);
    for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
        batches.push_back(all.subspan(start, std::min(batch_size, pairs.size() - start)));
    }
    return batches;
}

std::vector<ResidualPair> all_event_pairs(std::span<const std::uint8_t> events) {
    const std::size_t n = events.size();
    std::vector<ResidualPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        }
    }
    return pairs;
}

}  // namespace deepraft
