#include "doctest.h"

#include "pathid/model.hpp"
#include "pathid/scan.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace pathid;

namespace {

InterferometerSpec balanced3() {
    InterferometerSpec spec;
    spec.sources = {{"NL1", 1.0, 0.0, 0.0},
                    {"NL2", 1.0, 0.0, 0.0},
                    {"NL3", 1.0, 0.0, 0.0}};
    return spec;
}

ScanSpec sweep_last(double fixed_first, std::size_t points) {
    ScanSpec sc;
    sc.axes = {{2, 0.0, 2.0 * PI, points}};
    sc.fixed_phases = {{0, fixed_first}};
    return sc;
}

} // namespace

TEST_CASE("scan: grid is inclusive and evenly spaced") {
    const ScanResult res = scan_1d(balanced3(), sweep_last(0.0, 73));
    REQUIRE(res.axis_a_values.size() == 73);
    REQUIRE(res.rates.size() == 73);
    CHECK(res.axis_a_values.front() == 0.0);
    CHECK(res.axis_a_values.back() == doctest::Approx(2.0 * PI).epsilon(1e-15));
    const double step = res.axis_a_values[1] - res.axis_a_values[0];
    CHECK(step == doctest::Approx(2.0 * PI / 72.0).epsilon(1e-13));
}

TEST_CASE("scan: destructive operating point pins the fringe flat") {
    const ScanResult res = scan_1d(balanced3(), sweep_last(PI, 73));
    for (double r : res.rates)
        CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scan: two-thirds operating point reaches full contrast") {
    const ScanResult res = scan_1d(balanced3(), sweep_last(2.0 * PI / 3.0, 73));
    CHECK(*std::min_element(res.rates.begin(), res.rates.end()) <= 1e-10);
    CHECK(visibility_minmax(res) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scan: a lone source sweeps flat at its yield") {
    InterferometerSpec spec;
    spec.sources = {{"only", 1234.5, 0.0, 0.0}};
    ScanSpec sc;
    sc.axes = {{0, 0.0, 2.0 * PI, 73}};
    const ScanResult res = scan_1d(spec, sc);
    for (double r : res.rates)
        CHECK(r == doctest::Approx(1234.5).epsilon(1e-13));
}

TEST_CASE("scan: dense sweeps track the analytic contrast law") {
    for (double fixed : {0.0, PI / 3.0, 2.0 * PI / 3.0, PI}) {
        const ScanResult res = scan_1d(balanced3(), sweep_last(fixed, 721));
        const double v = visibility_minmax(res);
        CHECK(v == doctest::Approx(analytic_visibility_balanced(fixed)).scale(1.0).epsilon(1e-4));
    }
}

TEST_CASE("scan: analytic contrast law endpoints") {
    CHECK(analytic_visibility_balanced(0.0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(analytic_visibility_balanced(2.0 * PI / 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(analytic_visibility_balanced(PI) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("scan: plane cross sections replay the matching line sweeps exactly") {
    ScanSpec plane;
    plane.axes = {{0, 0.0, 2.0 * PI, 73}, {2, 0.0, 2.0 * PI, 73}};
    const ScanResult grid = scan_2d(balanced3(), plane);
    REQUIRE(grid.rates.size() == 73 * 73);

    for (std::size_t ia : {std::size_t{0}, std::size_t{24}, std::size_t{36}, std::size_t{61}}) {
        const ScanResult line = scan_1d(balanced3(), sweep_last(grid.axis_a_values[ia], 73));
        for (std::size_t ib = 0; ib < 73; ++ib)
            CHECK(grid.rates[ia * 73 + ib] == line.rates[ib]); // bitwise, same evaluations
    }
}

TEST_CASE("scan: plane corners and midpoint hit the textbook rates") {
    ScanSpec plane;
    plane.axes = {{0, 0.0, 2.0 * PI, 73}, {2, 0.0, 2.0 * PI, 73}};
    const ScanResult grid = scan_2d(balanced3(), plane);
    CHECK(grid.rates[0] == doctest::Approx(9.0).epsilon(1e-12));            // (0, 0)
    CHECK(grid.rates[36 * 73 + 36] == doctest::Approx(1.0).epsilon(1e-12)); // (pi, pi)
    CHECK(grid.rates[36 * 73 + 0] == doctest::Approx(1.0).epsilon(1e-12));  // (pi, 0)
    // balanced outer sources make the plane symmetric
    for (std::size_t ia = 0; ia < 73; ia += 9)
        for (std::size_t ib = 0; ib < 73; ib += 9)
            CHECK(grid.rates[ia * 73 + ib] ==
                  doctest::Approx(grid.rates[ib * 73 + ia]).epsilon(1e-12));
}

TEST_CASE("scan: rates are periodic in every phase slot") {
    std::mt19937 gen(99);
    std::uniform_real_distribution<double> yield(0.1, 2000.0);
    std::uniform_real_distribution<double> phase(-PI, PI);
    std::uniform_real_distribution<double> leak(0.0, PI / 2);
    for (int trial = 0; trial < 50; ++trial) {
        InterferometerSpec spec;
        for (int k = 0; k < 3; ++k)
            spec.sources.push_back({"s" + std::to_string(k), yield(gen), phase(gen), leak(gen)});
        const double base = pair_rate(spec);
        for (int k = 0; k < 3; ++k) {
            InterferometerSpec shifted = spec;
            shifted.sources[k].phase_rad += 2.0 * PI;
            CHECK(pair_rate(shifted) == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("scan: malformed sweep requests are rejected") {
    const InterferometerSpec spec = balanced3();
    ScanSpec sc;
    CHECK_THROWS_AS(scan_1d(spec, sc), validation_error); // no axis

    sc.axes = {{5, 0.0, 1.0, 10}};
    CHECK_THROWS_AS(scan_1d(spec, sc), validation_error); // slot out of range

    sc.axes = {{0, 0.0, 1.0, 1}};
    CHECK_THROWS_AS(scan_1d(spec, sc), validation_error); // fewer than two points

    sc.axes = {{0, 0.0, 1.0, 10}};
    sc.fixed_phases = {{0, 2.0}};
    CHECK_THROWS_AS(scan_1d(spec, sc), validation_error); // fixing the swept slot

    sc.fixed_phases.clear();
    CHECK_THROWS_AS(scan_2d(spec, sc), validation_error); // plane needs two axes

    sc.axes = {{0, 0.0, 1.0, 10}, {0, 0.0, 1.0, 10}};
    CHECK_THROWS_AS(scan_2d(spec, sc), validation_error); // same slot twice

    sc.axes = {{0, 0.0, 1.0, 10}, {2, 0.0, 1.0, 10}};
    CHECK_THROWS_AS(scan_1d(spec, sc), validation_error); // line vs plane mismatch
}

TEST_CASE("scan: min max visibility basics") {
    CHECK(visibility_minmax(std::vector<double>{9.0, 1.0}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(visibility_minmax(std::vector<double>{5.0, 5.0, 5.0}) == 0.0);
    CHECK_THROWS_AS(visibility_minmax(std::vector<double>{}), validation_error);
    CHECK_THROWS_AS(visibility_minmax(std::vector<double>{1.0}), validation_error);
    CHECK_THROWS_AS(visibility_minmax(std::vector<double>{0.0, 0.0}), domain_error);
    CHECK_THROWS_AS(visibility_minmax(std::vector<double>{-1.0, 2.0}), validation_error);
}

TEST_CASE("scan: noiseless fringe is fit exactly") {
    const double offset = 1000.0, vis = 0.5, phase0 = 0.7;
    std::vector<FringeSample> samples;
    for (int i = 0; i < 25; ++i) {
        const double phi = 2.0 * PI * i / 25.0;
        samples.push_back({phi, offset * (1.0 + vis * std::cos(phi - phase0)), 0.0});
    }
    const FringeFit fit = fit_sinusoid(samples);
    CHECK(fit.converged);
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.offset == doctest::Approx(offset).epsilon(1e-11));
    CHECK(fit.visibility == doctest::Approx(vis).epsilon(1e-11));
    CHECK(fit.phase0_rad == doctest::Approx(phase0).epsilon(1e-10));
    CHECK(fit.amplitude == doctest::Approx(offset * vis).epsilon(1e-11));
    CHECK(fit.residual_rms <= 1e-8);
}

TEST_CASE("scan: constant series fits flat with no preferred phase") {
    std::vector<FringeSample> samples;
    for (int i = 0; i < 12; ++i)
        samples.push_back({2.0 * PI * i / 12.0, 1600.0, 0.0});
    const FringeFit fit = fit_sinusoid(samples);
    CHECK(fit.converged);
    CHECK(fit.degenerate);
    CHECK(fit.phase0_rad == 0.0);
    CHECK(fit.offset == doctest::Approx(1600.0).epsilon(1e-12));
    CHECK(fit.visibility == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("scan: fits demand enough span and enough points") {
    std::vector<FringeSample> few = {{0.0, 1.0, 0.0}, {1.0, 2.0, 0.0}, {2.0, 1.5, 0.0}};
    CHECK_THROWS_AS(fit_sinusoid(few), validation_error);

    std::vector<FringeSample> narrow;
    for (int i = 0; i < 10; ++i)
        narrow.push_back({0.2 * PI * i / 9.0, 1.0 + 0.1 * i, 0.0});
    CHECK_THROWS_AS(fit_sinusoid(narrow), validation_error);

    std::vector<FringeSample> mixed = {{0.0, 1.0, 1.0}, {1.0, 2.0, 0.0},
                                       {2.0, 1.5, 1.0}, {4.0, 1.2, 1.0}};
    CHECK_THROWS_AS(fit_sinusoid(mixed), validation_error); // sigmas all set or none
}

TEST_CASE("scan: noisy fringe recovery stays within its own error bar") {
    const double offset = 2100.0, vis = 0.9853;
    for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull}) {
        std::vector<FringeSample> samples;
        for (int i = 0; i < 73; ++i) {
            const double phi = 2.0 * PI * i / 72.0;
            const double rate = offset * (1.0 + vis * std::cos(phi - 0.3));
            const double counts =
                static_cast<double>(monte_carlo_counts(rate, 1.0, mix_seed(seed, i)));
            samples.push_back({phi, counts, std::sqrt(std::max(counts, 1.0))});
        }
        const FringeFit fit = fit_sinusoid(samples);
        CHECK(fit.converged);
        CHECK(fit.sigma_visibility > 0.0);
        CHECK(fit.sigma_visibility < 0.05);
        CHECK(std::fabs(fit.visibility - vis) <= 5.0 * fit.sigma_visibility);
        CHECK(std::fabs(fit.phase0_rad - 0.3) <= 0.05);
    }
}

TEST_CASE("scan: pair draws are deterministic per seed") {
    for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
        CHECK(monte_carlo_counts(1600.0, 1.0, seed) == monte_carlo_counts(1600.0, 1.0, seed));
        CHECK(monte_carlo_counts(0.0, 1.0, seed) == 0);
    }
    // distinct seeds decorrelate: over ten seeds at least two distinct values
    std::vector<long long> draws;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        draws.push_back(monte_carlo_counts(1600.0, 1.0, seed));
    std::sort(draws.begin(), draws.end());
    CHECK(draws.front() != draws.back());

    CHECK_THROWS_AS(monte_carlo_counts(-1.0, 1.0, 0), validation_error);
    CHECK_THROWS_AS(monte_carlo_counts(10.0, 0.0, 0), validation_error);
}

TEST_CASE("scan: seeded draws never drift between builds") {
    const long long wide[5] = {1659, 1595, 1665, 1587, 1697};
    const long long narrow[5] = {10, 15, 10, 3, 8};
    for (int i = 0; i < 5; ++i) {
        CHECK(monte_carlo_counts(1600.0, 1.0, mix_seed(42, i)) == wide[i]);
        CHECK(monte_carlo_counts(3.5, 2.0, mix_seed(42, i)) == narrow[i]);
    }
}

TEST_CASE("scan: pair draws have matching mean and spread") {
    // large-mean and small-mean paths of the sampler
    for (double mean : {1600.0, 3.0}) {
        const int n = 10000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(monte_carlo_counts(mean, 1.0, mix_seed(505, i)));
            sum += x;
            sum_sq += x * x;
        }
        const double m = sum / n;
        const double var = sum_sq / n - m * m;
        const double sigma_mean = std::sqrt(mean / n);
        CHECK(std::fabs(m - mean) <= 4.0 * sigma_mean);
        const double sigma_var = mean * std::sqrt(2.0 / n); // ~chi^2 spread
        CHECK(std::fabs(var - mean) <= 5.0 * sigma_var);
    }
}

TEST_CASE("scan: counting sweeps resample identically per seed") {
    ScanSpec sc = sweep_last(2.0 * PI / 3.0, 73);
    sc.integration_time_s = 1.0;
    sc.seed = 99;
    const ScanResult a = scan_1d(balanced3(), sc);
    const ScanResult b = scan_1d(balanced3(), sc);
    REQUIRE(a.counts.size() == 73);
    REQUIRE(a.sigmas.size() == 73);
    CHECK(a.counts == b.counts);
    for (std::size_t i = 0; i < a.counts.size(); ++i)
        CHECK(a.sigmas[i] == std::sqrt(static_cast<double>(a.counts[i])));

    sc.seed = 100;
    const ScanResult c = scan_1d(balanced3(), sc);
    CHECK(a.counts != c.counts);

    sc.integration_time_s.reset();
    const ScanResult plain = scan_1d(balanced3(), sc);
    CHECK(plain.counts.empty());
    CHECK(plain.sigmas.empty());
}

TEST_CASE("scan: extreme count errors propagate one sided at the boundary") {
    // counts 2000 and 0: V = 1 and the propagated sigma collapses to 0
    const VisibilityEstimate edge = visibility_with_errors(std::vector<double>{2000.0, 1200.0, 0.0});
    CHECK(edge.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(edge.sigma == 0.0);

    // max 9 (sigma 3), min 1 (sigma 1): dV/dM = 0.02, dV/dm = -0.18
    const VisibilityEstimate mid = visibility_with_errors(std::vector<double>{9.0, 4.0, 1.0});
    CHECK(mid.value == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(mid.sigma == doctest::Approx(0.1897366596101028).epsilon(1e-12));

    // explicit zero sigmas mean noiseless inputs
    const std::vector<double> counts{9.0, 4.0, 1.0};
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    const VisibilityEstimate exact = visibility_with_errors(counts, zeros);
    CHECK(exact.value == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(exact.sigma == 0.0);

    CHECK_THROWS_AS(visibility_with_errors(std::vector<double>{0.0, 0.0}), domain_error);
    CHECK_THROWS_AS(visibility_with_errors(std::vector<double>{1.0}), validation_error);
}

TEST_CASE("scan: flat count series measure the noise floor") {
    // 12 draws at 1600 counts: range noise shows up as a percent-level visibility
    double mean_v = 0.0, mean_sigma = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> counts;
        for (int i = 0; i < 12; ++i)
            counts.push_back(
                static_cast<double>(monte_carlo_counts(1600.0, 1.0, mix_seed(7000 + t, i))));
        const VisibilityEstimate est = visibility_with_errors(counts);
        mean_v += est.value;
        mean_sigma += est.sigma;
    }
    mean_v /= trials;
    mean_sigma /= trials;
    CHECK(mean_v > 0.03);
    CHECK(mean_v < 0.055);
    CHECK(mean_sigma > 0.012);
    CHECK(mean_sigma < 0.025);
}
