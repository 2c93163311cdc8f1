#pragma once

#include "deepraft/core.hpp"

#include <cmath>
#include <random>

namespace testing {

using namespace deepraft;

inline SurvivalDataset make_dataset(std::initializer_list<double> time, std::initializer_list<int> event,
                                    Matrix x = Matrix()) {
    Vector y(static_cast<Eigen::Index>(time.size()));
    Eigen::Index k = 0;
    for (const double t : time) y[k++] = t;
    EventVector d;
    for (const int e : event) d.push_back(static_cast<std::uint8_t>(e));
    if (x.size() == 0) x = Matrix(y.size(), 0);
    return SurvivalDataset(std::move(y), std::move(d), std::move(x));
}

/// n subjects, p standard-normal covariates, log-normal times and roughly
/// event_rate observed failures.
inline SurvivalDataset random_dataset(std::size_t n, std::size_t p, Rng& rng, double event_rate = 0.7) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(event_rate);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = z(rng);
    }
    Vector y(static_cast<Eigen::Index>(n));
    EventVector d(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[static_cast<Eigen::Index>(i)] = std::exp(z(rng));
        d[i] = coin(rng) ? 1 : 0;
    }
    d[0] = 1;
    return SurvivalDataset(std::move(y), std::move(d), std::move(x));
}

inline Vector random_vector(std::size_t n, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& e : v) e = z(rng);
    return v;
}

inline EventVector random_events(std::size_t n, Rng& rng, double rate = 0.6) {
    std::bernoulli_distribution coin(rate);
    EventVector d(n);
    for (auto& e : d) e = coin(rng) ? 1 : 0;
    return d;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing
