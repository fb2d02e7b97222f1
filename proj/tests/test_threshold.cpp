#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tailboost/baseline.hpp"
#include "tailboost/loss.hpp"
#include "tailboost/rng.hpp"
#include "tailboost/sim.hpp"
#include "tailboost/threshold.hpp"

using namespace tailboost;

namespace {

UniformResiduals make_res(std::vector<double> v) {
    UniformResiduals r;
    r.values = std::move(v);
    return r;
}

}  // namespace

TEST_CASE("residual transform cancels a known exponent") {
    Dataset d;
    d.features = Matrix(3, 1);
    d.features(0, 0) = 0.2;
    d.features(1, 0) = 0.9;
    d.features(2, 0) = 0.5;
    GammaFn gamma = [](std::span<const double> x) { return 0.3 + x[0]; };

    const double u = 2.0;
    d.responses.resize(3);
    for (std::size_t i = 0; i < 3; ++i) {
        d.responses[i] = u * std::exp(gamma(d.features.row(i)));  // y = u e^gamma(x)
    }
    ThresholdSpec t = ThresholdSpec::from_value(d.responses, u);
    const UniformResiduals res = u_transform(d, gamma, t);
    REQUIRE(res.values.size() == 3);
    for (double v : res.values) CHECK(v == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("residuals approach the interval limits") {
    Dataset d;
    d.features = Matrix(2, 1);
    d.responses = {1e12, 2.0 + 1e-9};
    ThresholdSpec t;
    t.u = 2.0;
    t.q = 0.5;
    t.k = 2;
    const UniformResiduals res =
        u_transform(d, [](std::span<const double>) { return 0.8; }, t);
    CHECK(res.values[0] < 1e-10);
    CHECK(res.values[0] > 0.0);
    CHECK(res.values[1] > 0.999999);
    CHECK(res.values[1] < 1.0);
    // residuals come in input row order
    CHECK(res.values[0] < res.values[1]);
}

TEST_CASE("residuals from the generative surface look uniform") {
    // oracle: simulate with the true gamma, transform, and KS-test
    Rng rng(41);
    const double u = 3.0;
    const double gamma_true = 0.4;
    Dataset d;
    d.features = Matrix(4000, 1);
    d.responses.resize(4000);
    for (std::size_t i = 0; i < 4000; ++i) {
        d.features(i, 0) = rng.uniform01();
        // exact Pareto above u: y = u * U^(-gamma)
        d.responses[i] = u * std::pow(rng.uniform01(), -gamma_true);
    }
    ThresholdSpec t = ThresholdSpec::from_value(d.responses, u);
    const UniformResiduals res =
        u_transform(d, [&](std::span<const double>) { return gamma_true; }, t);
    const KsResult ks = ks_uniform_test(res);
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("discrepancies on a single residual") {
    const Discrepancies d = discrepancies(make_res({0.5}));
    CHECK(d.d1 == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(d.d2 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.d3 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("residuals equal to their own ECDF values contribute nothing") {
    std::vector<double> v;
    for (int i = 1; i <= 9; ++i) v.push_back(static_cast<double>(i) / 10.0);
    const double last = 1.0 - 1e-6;
    v.push_back(last);
    const Discrepancies d = discrepancies(make_res(v));
    const double gap = last - 1.0;
    CHECK(d.d1 == doctest::Approx(gap * gap / 10.0).epsilon(1e-12));
    CHECK(d.d2 == doctest::Approx(std::abs(gap)).epsilon(1e-12));
    CHECK(d.d3 == doctest::Approx(gap * gap / (last * (1.0 - last)) / 10.0).epsilon(1e-12));
}

TEST_CASE("discrepancies match the quadratic-time oracle") {
    Rng rng(42);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> v(1 + rng.uniform_index(60));
        for (double& x : v) x = 0.001 + 0.998 * rng.uniform01();
        if (rep % 3 == 0 && v.size() > 2) v[1] = v[0];  // exercise ties
        const Discrepancies got = discrepancies(make_res(v));

        const double k = static_cast<double>(v.size());
        double d1 = 0.0, d2 = 0.0, d3 = 0.0;
        for (double x : v) {
            const double gap = x - oracles::naive_ecdf(v, x);
            d1 += gap * gap / k;
            d2 = std::max(d2, std::abs(gap));
            d3 += gap * gap / (x * (1.0 - x)) / k;
        }
        CHECK(oracles::rel_err(got.d1, d1) < 1e-12);
        CHECK(oracles::rel_err(got.d2, d2) < 1e-12);
        CHECK(oracles::rel_err(got.d3, d3) < 1e-12);
    }
}

TEST_CASE("discrepancies are permutation-invariant") {
    Rng rng(43);
    std::vector<double> v(40);
    for (double& x : v) x = 0.01 + 0.98 * rng.uniform01();
    const Discrepancies a = discrepancies(make_res(v));
    rng.shuffle(v);
    const Discrepancies b = discrepancies(make_res(v));
    CHECK(a.d1 == b.d1);
    CHECK(a.d2 == b.d2);
    CHECK(a.d3 == b.d3);
}

TEST_CASE("discrepancies reject residuals on the boundary") {
    CHECK_THROWS_AS(discrepancies(make_res({0.5, 1.0})), std::domain_error);
    CHECK_THROWS_AS(discrepancies(make_res({0.0, 0.5})), std::domain_error);
}

TEST_CASE("KS statistic on symmetric grids") {
    for (std::size_t k : {1u, 4u, 25u, 100u}) {
        std::vector<double> v(k);
        for (std::size_t i = 1; i <= k; ++i) {
            v[i - 1] = (static_cast<double>(i) - 0.5) / static_cast<double>(k);
        }
        const KsResult ks = ks_uniform_test(make_res(v));
        CHECK(ks.statistic == doctest::Approx(0.5 / static_cast<double>(k)).epsilon(1e-13));
    }
    CHECK(ks_uniform_test(make_res({0.5})).statistic == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sample-point sup never exceeds the exact KS statistic") {
    Rng rng(44);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(1 + rng.uniform_index(80));
        for (double& x : v) x = 0.001 + 0.998 * rng.uniform01();
        const double d2 = discrepancies(make_res(v)).d2;
        const double exact = ks_uniform_test(make_res(v)).statistic;
        CHECK(d2 <= exact + 1e-15);
    }
}

TEST_CASE("limiting Kolmogorov distribution") {
    CHECK(kolmogorov_survival(0.0) == 1.0);
    CHECK(kolmogorov_survival(-1.0) == 1.0);
    // K(0.5) from the theta-series (2 * (e^-1/2 - e^-2 + e^-9/2 - ...))
    CHECK(kolmogorov_survival(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-10));
    CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967168735794).epsilon(1e-10));
    CHECK(kolmogorov_survival(10.0) < 1e-80);
}

TEST_CASE("KS p-values are calibrated on pseudo-uniform draws") {
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(derive_seed(45, seed));
        std::vector<double> v(10000);
        for (double& x : v) x = rng.uniform01();
        const KsResult ks = ks_uniform_test(make_res(v));
        CHECK(ks.p_value > 0.001);
        CHECK(ks.p_value <= 1.0);
        if (ks.p_value < 0.05) ++rejections;
    }
    const double rate = rejections / 200.0;
    CHECK(rate > 0.02);
    CHECK(rate < 0.08);
}

TEST_CASE("threshold scan picks the measure-minimizing fraction") {
    // constant-gamma fitter: cheap and fully deterministic
    ThresholdFitter fitter = [](const Dataset& data, const ThresholdSpec& t) {
        ThresholdFit out;
        const double h = hill_init(data.responses, t);
        out.gamma = [h](std::span<const double>) { return h; };
        return out;
    };

    Rng rng(46);
    Dataset d;
    d.features = Matrix(500, 1);
    d.responses.resize(500);
    for (std::size_t i = 0; i < 500; ++i) {
        d.features(i, 0) = rng.uniform01();
        d.responses[i] = std::pow(rng.uniform01(), -0.5);  // Pareto, gamma = 1/2
    }

    SUBCASE("singleton grid returns its only point") {
        const double grid[1] = {0.5};
        const ScanResult scan = scan_thresholds(d, fitter, grid, Measure::sum, 20);
        CHECK(scan.best_q == 0.5);
        REQUIRE(scan.reports.size() == 1);
        CHECK(scan.reports[0].k >= 20);
    }

    SUBCASE("best point minimizes the requested measure") {
        const double grid[4] = {0.1, 0.2, 0.4, 0.8};
        const ScanResult scan = scan_thresholds(d, fitter, grid, Measure::d1, 20);
        REQUIRE(scan.reports.size() == 4);
        for (const auto& report : scan.reports) {
            CHECK(scan.reports[scan.best_index].d1 <= report.d1);
        }
    }

    SUBCASE("infeasible points are skipped, empty scans throw") {
        const double grid[2] = {0.01, 0.5};  // 0.01 -> k = 5 < 20
        const ScanResult scan = scan_thresholds(d, fitter, grid, Measure::sum, 20);
        CHECK(scan.reports.size() == 1);
        CHECK(scan.reports[0].q == 0.5);

        const double bad[1] = {0.01};
        CHECK_THROWS_AS(scan_thresholds(d, fitter, bad, Measure::sum, 20), InfeasibleError);
    }
}

TEST_CASE("scan ties go to the smallest fraction") {
    // responses {0.5, 1, 2, 4} with gamma == 1: the d2 measure ties between
    // the k=1 tail over u=2 and the k=2 tail over u=1
    Dataset d;
    d.features = Matrix(4, 1);
    d.responses = {0.5, 1.0, 2.0, 4.0};
    ThresholdFitter fitter = [](const Dataset&, const ThresholdSpec&) {
        ThresholdFit out;
        out.gamma = [](std::span<const double>) { return 1.0; };
        return out;
    };
    const double grid[2] = {0.25, 0.5};
    const ScanResult scan = scan_thresholds(d, fitter, grid, Measure::d2, 1);
    REQUIRE(scan.reports.size() == 2);
    CHECK(scan.reports[0].d2 == scan.reports[1].d2);
    CHECK(scan.best_q == 0.25);
}

TEST_CASE("slowly-converging tails give a U-shaped discrepancy profile") {
    // with a large second-order parameter, low thresholds pay an
    // approximation bias and high thresholds pay estimation noise, so the
    // summed discrepancies dip strictly inside the fraction grid
    const std::vector<double> grid = {0.03, 0.06, 0.1, 0.15, 0.22, 0.32, 0.45, 0.6, 0.75, 0.9};
    for (const std::uint64_t seed : {11ull, 222ull, 3333ull, 44444ull, 555555ull}) {
        Rng rng(seed);
        Dataset d;
        d.features = gen_covariates(1500, 10, rng);
        d.responses.resize(1500);
        for (std::size_t i = 0; i < 1500; ++i) {
            const double g = gamma_case(1, d.features.row(i), 1.0 / 3.0);
            d.responses[i] = sample_response(g, 15.0, rng.uniform01(), DgpVariant::corrected);
        }
        const ScanResult scan = scan_thresholds(d, make_tir_fitter(), grid, Measure::sum, 20, 1);
        REQUIRE(scan.reports.size() == grid.size());
        const auto sum = [&](std::size_t i) {
            return scan.reports[i].d1 + scan.reports[i].d2 + scan.reports[i].d3;
        };
        CHECK(scan.best_index > 0);
        CHECK(scan.best_index + 1 < scan.reports.size());
        CHECK(sum(0) > sum(scan.best_index));
        CHECK(sum(scan.reports.size() - 1) > sum(scan.best_index));

        // the per-replicate optimal fraction lands strictly inside (0,1)
        const double qstar = optimal_fraction(d, make_tir_fitter(), grid);
        CHECK(qstar == scan.best_q);
        CHECK(qstar > grid.front());
        CHECK(qstar < grid.back());
    }
}

TEST_CASE("default fraction grid spans (0,1) in steps of 0.005") {
    const std::vector<double> grid = default_q_grid();
    REQUIRE(grid.size() == 199);
    CHECK(grid.front() == doctest::Approx(0.005));
    CHECK(grid.back() == doctest::Approx(0.995));
}
