#include "deepraft/bench.hpp"

#include "deepraft/gehan.hpp"
#include "deepraft/reference.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace deepraft {

namespace {

class ThreadGuard {
public:
    explicit ThreadGuard(int threads) : previous_(omp_get_max_threads()) {
        if (threads > 0) omp_set_num_threads(threads);
    }
    ~ThreadGuard() { omp_set_num_threads(previous_); }
    ThreadGuard(const ThreadGuard&) = delete;
    ThreadGuard& operator=(const ThreadGuard&) = delete;

private:
    int previous_;
};

volatile double g_sink = 0.0;

}  // namespace

TimingSample time_median(const std::function<double()>& fn, const TimingOptions& options) {
    using clock = std::chrono::steady_clock;
    const auto run = [&](std::size_t iters) {
        double acc = 0.0;
        const auto t0 = clock::now();
        for (std::size_t k = 0; k < iters; ++k) acc += fn();
        const auto t1 = clock::now();
        g_sink = g_sink + acc;
        return std::chrono::duration<double>(t1 - t0).count();
    };

    g_sink = g_sink + fn();  // warm-up
    std::size_t iters = 1;
    double elapsed = run(iters);
    while (elapsed < options.min_sample_seconds && iters < (std::size_t{1} << 30)) {
        const double factor = elapsed > 0.0 ? std::clamp(1.2 * options.min_sample_seconds / elapsed, 2.0, 100.0) : 100.0;
        iters = static_cast<std::size_t>(std::ceil(static_cast<double>(iters) * factor));
        elapsed = run(iters);
    }

    std::vector<double> samples;
    samples.reserve(options.repetitions);
    for (std::size_t r = 0; r < std::max<std::size_t>(options.repetitions, 1); ++r) {
        samples.push_back(run(iters) / static_cast<double>(iters));
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t m = samples.size() / 2;
    const double median = samples.size() % 2 ? samples[m] : 0.5 * (samples[m - 1] + samples[m]);
    return {median, iters};
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope: need >= 2 paired points");
    double mx = 0.0, my = 0.0;
    const auto n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0 && y[k] > 0.0)) throw std::invalid_argument("log_log_slope: values must be positive");
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("log_log_slope: x values are all equal");
    return sxy / sxx;
}

TimingTable loss_timing_sweep(const std::vector<std::size_t>& sizes, std::size_t pairs_per_event,
                              std::size_t repetitions, Rng& rng) {
    SweepOptions opts;
    opts.pairs_per_event = pairs_per_event;
    opts.timing.repetitions = repetitions;
    return loss_timing_sweep(sizes, opts, rng);
}

TimingTable loss_timing_sweep(const std::vector<std::size_t>& sizes, const SweepOptions& options, Rng& rng) {
    if (sizes.empty()) throw std::invalid_argument("loss_timing_sweep: no sizes");
    if (!std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() == 0) {
        throw std::invalid_argument("loss_timing_sweep: sizes must be positive and ascending");
    }
    if (options.timing.repetitions < 3) throw std::invalid_argument("loss_timing_sweep: repetitions must be >= 3");
    if (options.pairs_per_event == 0) throw std::invalid_argument("loss_timing_sweep: pairs_per_event must be positive");

    const ThreadGuard guard(options.threads);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution event(options.event_rate);

    TimingTable table;
    for (const std::size_t n : sizes) {
        const auto len = static_cast<Eigen::Index>(n);
        Vector res(len);
        EventVector delta(n);
        for (std::size_t i = 0; i < n; ++i) {
            res[static_cast<Eigen::Index>(i)] = normal(rng);
            delta[i] = event(rng) ? 1 : 0;
        }
        delta[0] = 1;  // at least one anchor
        const SurvivalDataset data(res.array().exp().matrix(), delta, Matrix(len, 0));
        const ResidualVector residual(res);

        TimingRow row;
        row.n = n;
        row.events = data.event_count();
        row.pairs_per_event = std::min(options.pairs_per_event, n - 1);
        PairSample sample;
        if (row.pairs_per_event > 0) sample = subsample_pairs(data, row.pairs_per_event, rng);
        const std::span<const ResidualPair> pairs(sample.pairs);

        std::size_t counted = 0;
        const auto sub = [&] {
            counted = pairs.size();
            return minibatch_loss(residual, pairs);
        };
        std::function<double()> full;
        if (options.kernel == LossKernel::serial) {
            full = [&] { return reference::full_gehan_loss(residual.span(), data.events()); };
        } else {
            full = [&] { return full_gehan_loss(residual, data.events()); };
        }

        row.full_loss = full();
        row.sub_loss = sub();
        row.pairs_evaluated = counted;
        if (row.pairs_evaluated > row.events * row.pairs_per_event) {
            throw std::logic_error("loss_timing_sweep: sub-sampled evaluation exceeded events * s pairs");
        }
        row.full_seconds = time_median(full, options.timing).median_seconds;
        row.sub_seconds = time_median(sub, options.timing).median_seconds;
        table.rows.push_back(row);
    }

    if (table.rows.size() >= 2) {
        std::vector<double> ns, full_t, sub_t;
        for (const auto& r : table.rows) {
            ns.push_back(static_cast<double>(r.n));
            full_t.push_back(std::max(r.full_seconds, 1e-12));
            sub_t.push_back(std::max(r.sub_seconds, 1e-12));
        }
        table.full_slope = log_log_slope(ns, full_t);
        table.sub_slope = log_log_slope(ns, sub_t);
    }
    return table;
}

std::string format_timing_table(const TimingTable& table, ResultFormat format) {
    std::ostringstream out;
    char buf[256];
    if (format == ResultFormat::csv) {
        out << "n,events,pairs_per_event,pairs_evaluated,full_seconds,sub_seconds,full_loss,sub_loss\n";
        for (const auto& r : table.rows) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.9g,%.9g,%.17g,%.17g\n", r.n, r.events, r.pairs_per_event,
                          r.pairs_evaluated, r.full_seconds, r.sub_seconds, r.full_loss, r.sub_loss);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "# full_slope=%.4f\n# sub_slope=%.4f\n", table.full_slope, table.sub_slope);
        out << buf;
        return out.str();
    }
    std::snprintf(buf, sizeof buf, "%8s %8s %4s %10s %14s %14s %9s\n", "n", "events", "s", "pairs", "full [s]",
                  "sub [s]", "speedup");
    out << buf;
    for (const auto& r : table.rows) {
        const double speedup = r.sub_seconds > 0.0 ? r.full_seconds / r.sub_seconds : 0.0;
        std::snprintf(buf, sizeof buf, "%8zu %8zu %4zu %10zu %14.6e %14.6e %9.1f\n", r.n, r.events, r.pairs_per_event,
                      r.pairs_evaluated, r.full_seconds, r.sub_seconds, speedup);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "log-log slope: full %.3f, sub-sampled %.3f\n", table.full_slope, table.sub_slope);
    out << buf;
    return out.str();
}

}  // namespace deepraft
