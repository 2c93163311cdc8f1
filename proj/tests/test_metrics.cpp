#include "deepraft/metrics.hpp"
#include "deepraft/reference.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace deepraft;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (const double e : v) x[k++] = e;
    return x;
}

// Literal pair count: comparable when Delta_i = 1 and y_i < y_j.
std::pair<std::uint64_t, std::uint64_t> brute_counts(const Vector& y, const EventVector& d, const Vector& f) {
    std::uint64_t conc = 0, comp = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            if (d[static_cast<std::size_t>(i)] && y[i] < y[j]) {
                ++comp;
                if (f[i] < f[j]) ++conc;
            }
        }
    }
    return {conc, comp};
}

Vector rounded(const Vector& v, double grid) { return (v / grid).array().round().matrix() * grid; }

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("mse examples and errors") {
    CHECK(mse(vec({0, 2}), vec({1, 0})) == 2.5);
    CHECK(mse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK_THROWS_AS(mse(vec({1}), vec({1, 2})), DimensionError);
    CHECK_THROWS_AS(mse(Vector(0), Vector(0)), EmptyDataError);
}

TEST_CASE("c-index examples") {
    const EventVector all{1, 1, 1};
    CHECK(c_index(vec({1, 2, 3}), all, vec({1, 2, 3})) == 1.0);
    CHECK(c_index(vec({1, 2, 3}), all, vec({3, 2, 1})) == 0.0);
    // tied predictions earn nothing
    CHECK(c_index(vec({1, 2, 3}), all, vec({5, 5, 5})) == 0.0);
    // censored first subject: only pair (2, 3) is comparable
    CHECK(c_index(vec({1, 2, 3}), EventVector{0, 1, 0}, vec({9, 1, 2})) == 1.0);
    // tied times are never comparable
    CHECK_THROWS_AS(c_index(vec({2, 2}), EventVector{1, 1}, vec({1, 2})), UndefinedMetricError);
    CHECK_THROWS_AS(c_index(vec({1, 2}), EventVector{0, 0}, vec({1, 2})), UndefinedMetricError);
    CHECK_THROWS_AS(c_index(vec({1, 2}), EventVector{1, 0}, vec({1})), DimensionError);
}

TEST_CASE("concordance counts match the literal count and the serial reference") {
    Rng rng = make_stream(51, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + static_cast<std::size_t>(rep) * 5;
        // coarse grids force ties in both times and predictions
        const Vector y = rounded(testing::random_vector(n, rng).array().exp().matrix(), rep % 2 ? 0.25 : 1e-9);
        const Vector f = rounded(testing::random_vector(n, rng), rep % 3 ? 0.5 : 1e-9);
        const EventVector d = testing::random_events(n, rng);
        const auto [conc, comp] = brute_counts(y, d, f);
        const std::span<const double> ys{y.data(), n}, fs{f.data(), n};
        const auto lib = concordance_counts(ys, d, fs);
        const auto ref = reference::concordance_counts(ys, d, fs);
        CHECK(lib.concordant == conc);
        CHECK(lib.comparable == comp);
        CHECK(ref.concordant == conc);
        CHECK(ref.comparable == comp);
    }
}

TEST_CASE("c-index invariances") {
    Rng rng = make_stream(52, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 60;
        const Vector y = testing::random_vector(n, rng).array().exp().matrix();
        const Vector f = testing::random_vector(n, rng);
        EventVector d = testing::random_events(n, rng);
        d[0] = 1;
        const double c = c_index(y, d, f);

        // strictly increasing transforms of predictions and of times
        CHECK(c_index(y, d, (3.0 * f.array() + 1.0).matrix()) == c);
        CHECK(c_index(y, d, f.unaryExpr([](double v) { return std::exp(v); })) == c);
        CHECK(c_index(y.array().log().matrix(), d, f) == c);

        // relabelling subjects
        std::vector<Eigen::Index> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Vector yp(n), fp(n);
        EventVector dp(n);
        for (std::size_t k = 0; k < n; ++k) {
            yp[static_cast<Eigen::Index>(k)] = y[perm[k]];
            fp[static_cast<Eigen::Index>(k)] = f[perm[k]];
            dp[k] = d[static_cast<std::size_t>(perm[k])];
        }
        CHECK(c_index(yp, dp, fp) == c);

        // reversal: without prediction ties the two orderings split the pairs
        CHECK(c + c_index(y, d, (-f).eval()) == doctest::Approx(1.0).epsilon(1e-14));
        const Vector tied = rounded(f, 0.5);
        CHECK(c_index(y, d, tied) + c_index(y, d, (-tied).eval()) <= 1.0 + 1e-14);
    }
}

TEST_CASE("random predictions score about one half") {
    Rng rng = make_stream(53, 0);
    const std::size_t n = 2000;
    const Vector y = testing::random_vector(n, rng).array().exp().matrix();
    const EventVector d = testing::random_events(n, rng);
    const double c = c_index(y, d, testing::random_vector(n, rng));
    CHECK(std::abs(c - 0.5) < 0.03);
}

}  // TEST_SUITE
