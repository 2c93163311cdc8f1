// Serial reference kernels against their OpenMP counterparts, then the
// full vs sub-sampled loss sweep.
//
//   bench_kernels [n=4000] [threads=0 (all)]

#include "deepraft/baselines.hpp"
#include "deepraft/bench.hpp"
#include "deepraft/gehan.hpp"
#include "deepraft/metrics.hpp"
#include "deepraft/reference.hpp"
#include "deepraft/simgen.hpp"

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <string>

using namespace deepraft;

namespace {

void report(const char* name, const TimingSample& serial, const TimingSample& parallel) {
    std::printf("%-28s serial %12.6e s   omp %12.6e s   speedup %6.2f\n", name, serial.median_seconds,
                parallel.median_seconds, serial.median_seconds / parallel.median_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1 && (std::string(argv[1]) == "-h" || std::string(argv[1]) == "--help")) {
        std::printf("usage: bench_kernels [n=4000] [threads=0 (all)]\n");
        return 0;
    }
    const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 4000;
    if (n < 2) {
        std::fprintf(stderr, "bench_kernels: n must be at least 2\n");
        return 2;
    }
    const int threads = argc > 2 ? std::atoi(argv[2]) : 0;
    if (threads > 0) omp_set_num_threads(threads);
    std::printf("n = %zu, OpenMP threads = %d\n\n", n, omp_get_max_threads());

    ScenarioConfig cfg;
    cfg.mean_kind = MeanKind::linear;
    Rng rng = make_stream(42, 0);
    const SimulatedData sim = gen_dataset(cfg, n, rng);
    const SurvivalDataset& data = sim.data;
    const ResidualVector res = residuals(data, sim.true_mean);
    const Vector pred = -sim.true_mean;
    TimingOptions t;

    report("full_gehan_loss",
           time_median([&] { return reference::full_gehan_loss(res.span(), data.events()); }, t),
           time_median([&] { return full_gehan_loss(res, data.events()); }, t));
    report("gehan_subgradient",
           time_median([&] { return reference::gehan_subgradient(res.span(), data.events())[0]; }, t),
           time_median([&] { return gehan_subgradient(res, data.events())[0]; }, t));
    const std::span<const double> time(data.observed_time().data(), data.n());
    const std::span<const double> p(pred.data(), data.n());
    report("concordance_counts",
           time_median([&] { return double(reference::concordance_counts(time, data.events(), p).concordant); }, t),
           time_median([&] { return double(concordance_counts(time, data.events(), p).concordant); }, t));
    const Vector slopes = Vector::Constant(3, 1.0);
    report("smoothed_estimating_fn",
           time_median([&] { return reference::smoothed_estimating_function(slopes, data, false, 1.0)[0]; }, t),
           time_median([&] { return smoothed_estimating_function(slopes, data, {})[0]; }, t));

    std::printf("\nfull vs sub-sampled Gehan loss (s = 5, sequential)\n");
    Rng sweep_rng = make_stream(42, 1);
    const TimingTable table = loss_timing_sweep({1000, 2000, 4000, 8000}, 5, 5, sweep_rng);
    std::printf("%s", format_timing_table(table, ResultFormat::text).c_str());
    return 0;
}
