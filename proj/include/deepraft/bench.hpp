#pragma once

// Timing harness for the full O(n^2) Gehan loss against the sub-sampled
// O(n s) loss.

#include "deepraft/core.hpp"
#include "deepraft/io.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace deepraft {

struct TimingOptions {
    std::size_t repetitions = 5;      // timed samples after the warm-up call
    double min_sample_seconds = 1e-2;  // inner loop is repeated until a sample lasts this long
};

struct TimingSample {
    double median_seconds = 0.0;  // per call
    std::size_t inner_iterations = 1;
};

/// Median per-call wall time of fn on the steady clock, with one untimed
/// warm-up call and an inner loop calibrated to the sample length.
[[nodiscard]] TimingSample time_median(const std::function<double()>& fn, const TimingOptions& options = {});

enum class LossKernel { parallel, serial };

struct SweepOptions {
    std::size_t pairs_per_event = 5;
    double event_rate = 0.7;
    LossKernel kernel = LossKernel::parallel;
    int threads = 1;  // OpenMP threads while timing; the previous setting is restored
    TimingOptions timing;
};

struct TimingRow {
    std::size_t n = 0;
    std::size_t events = 0;
    std::size_t pairs_per_event = 0;  // effective s, min(s, n - 1)
    std::size_t pairs_evaluated = 0;  // counted inside the sub-sampled evaluation
    double full_seconds = 0.0;
    double sub_seconds = 0.0;
    double full_loss = 0.0;
    double sub_loss = 0.0;
};

struct TimingTable {
    std::vector<TimingRow> rows;
    double full_slope = 0.0;  // least-squares slope of log time on log n
    double sub_slope = 0.0;
};

/// For each n: synthetic residuals and events, a fresh PairSample covering all
/// event subjects, then median timings of full_gehan_loss and minibatch_loss.
/// Sizes must be ascending; repetitions >= 3.
[[nodiscard]] TimingTable loss_timing_sweep(const std::vector<std::size_t>& sizes, std::size_t pairs_per_event,
                                            std::size_t repetitions, Rng& rng);
[[nodiscard]] TimingTable loss_timing_sweep(const std::vector<std::size_t>& sizes, const SweepOptions& options,
                                            Rng& rng);

/// Slope of the least-squares line through (log x, log y). Needs >= 2 points.
[[nodiscard]] double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

[[nodiscard]] std::string format_timing_table(const TimingTable& table, ResultFormat format);

}  // namespace deepraft
