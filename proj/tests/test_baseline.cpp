#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tailboost/baseline.hpp"
#include "tailboost/loss.hpp"
#include "tailboost/rng.hpp"
#include "tailboost/sim.hpp"

using namespace tailboost;

namespace {

// analytic deviance gradient in theta, written out independently
std::vector<double> tir_gradient(const Dataset& d, const ThresholdSpec& t,
                                 const std::vector<double>& theta) {
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double y = d.responses[i];
        if (!(y > t.u)) continue;
        const auto x = d.features.row(i);
        double s = theta[0];
        for (std::size_t j = 0; j < x.size(); ++j) s += theta[j + 1] * x[j];
        const double coef = 1.0 - std::log(y / t.u) * std::exp(-s);
        grad[0] += coef;
        for (std::size_t j = 0; j < x.size(); ++j) grad[j + 1] += coef * x[j];
    }
    return grad;
}

Dataset tir_sample(std::size_t n, std::uint64_t seed, int scenario = 1) {
    Rng rng(seed);
    Dataset d;
    d.features = gen_covariates(n, 10, rng);
    d.responses.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double gamma = gamma_case(scenario, d.features.row(i), 1.0 / 3.0);
        d.responses[i] = sample_response(gamma, 0.10, rng.uniform01(), DgpVariant::corrected);
    }
    return d;
}

}  // namespace

TEST_CASE("all-zero covariates collapse to the Hill constant") {
    Rng rng(61);
    Dataset d;
    d.features = Matrix(200, 3, 0.0);
    d.responses.resize(200);
    for (auto& y : d.responses) y = std::pow(rng.uniform01(), -0.4);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.3);
    const TirModel model = fit_tir(d, t);
    CHECK(model.theta[0] == doctest::Approx(std::log(hill(d, t))).epsilon(1e-12));
    for (std::size_t j = 1; j < model.theta.size(); ++j) CHECK(model.theta[j] == 0.0);
    CHECK(predict_tir(model, d.features.row(0)) == doctest::Approx(hill(d, t)).epsilon(1e-10));
}

TEST_CASE("returned theta satisfies the stopping contract") {
    Dataset d = tir_sample(800, 62);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.15);
    const TirOptions opts;
    const TirModel model = fit_tir(d, t, opts);
    const std::vector<double> grad = tir_gradient(d, t, model.theta);
    for (double g : grad) CHECK(std::abs(g) < opts.tol);
}

TEST_CASE("descent from the Hill initialization") {
    Dataset d = tir_sample(600, 63, 3);  // misspecified surface
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.2);
    const TirModel model = fit_tir(d, t);

    std::vector<double> init(d.n_features() + 1, 0.0);
    init[0] = std::log(hill(d, t));
    auto as_fn = [&](const std::vector<double>& theta) -> GammaFn {
        return [theta](std::span<const double> x) {
            double s = theta[0];
            for (std::size_t j = 0; j < x.size(); ++j) s += theta[j + 1] * x[j];
            return std::exp(s);
        };
    };
    CHECK(total_loss(d, model.as_fn(), t) <= total_loss(d, as_fn(init), t));
}

TEST_CASE("estimates recover the generative coefficients on case 1") {
    Dataset d = tir_sample(5000, 64);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.1);
    const TirModel model = fit_tir(d, t);
    const std::vector<double> want = {std::log(1.0 / 3.0), -0.5, 1.0 / 3.0, -1.0 / 3.0,
                                      0.0,  0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    REQUIRE(model.theta.size() == want.size());
    for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(std::abs(model.theta[j] - want[j]) < 0.15);
    }
}

TEST_CASE("prediction is the exponential of an affine form") {
    TirModel model;
    model.theta = {0.0, 0.0, 0.0};
    const double x[2] = {3.0, -1.0};
    CHECK(predict_tir(model, x) == 1.0);

    model.theta = {0.7, 0.2, -0.4};
    const double zero[2] = {0.0, 0.0};
    CHECK(predict_tir(model, zero) == doctest::Approx(std::exp(0.7)).epsilon(1e-15));

    const double a[2] = {1.0, 2.0};
    const double b[2] = {-0.5, 0.25};
    const double mid[2] = {0.25, 1.125};
    CHECK(std::log(predict_tir(model, mid)) ==
          doctest::Approx(0.5 * (std::log(predict_tir(model, a)) +
                                 std::log(predict_tir(model, b))))
              .epsilon(1e-12));

    Rng rng(65);
    for (int rep = 0; rep < 100; ++rep) {
        const double x2[2] = {20.0 * rng.uniform01() - 10.0, 20.0 * rng.uniform01() - 10.0};
        CHECK(predict_tir(model, x2) > 0.0);
    }

    const double wrong[3] = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(predict_tir(model, wrong), std::invalid_argument);
}

TEST_CASE("hill is scale-invariant and matches a spreadsheet sum") {
    Dataset d;
    d.features = Matrix(6, 1);
    d.responses = {0.9, 1.2, 3.1, 0.4, 7.5, 2.0};
    ThresholdSpec t = ThresholdSpec::from_value(d.responses, 1.0);
    // hand sum over {1.2, 3.1, 7.5, 2.0}
    const double want =
        (std::log(1.2) + std::log(3.1) + std::log(7.5) + std::log(2.0)) / 4.0;
    CHECK(hill(d, t) == doctest::Approx(want).epsilon(1e-15));

    Dataset scaled = d;
    for (auto& y : scaled.responses) y *= 37.5;
    ThresholdSpec ts = ThresholdSpec::from_value(scaled.responses, 37.5);
    CHECK(hill(scaled, ts) == doctest::Approx(hill(d, t)).epsilon(1e-12));
}

TEST_CASE("tir needs enough exceedances") {
    Dataset d = tir_sample(100, 66);
    ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.05);  // k = 5 < p+1
    CHECK_THROWS_AS(fit_tir(d, t), InfeasibleError);
}

TEST_CASE("tir threshold-scan fitter reports no tuning triple") {
    Dataset d = tir_sample(400, 67);
    const ThresholdFitter fitter = make_tir_fitter();
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.2);
    const ThresholdFit out = fitter(d, t);
    CHECK(out.selected_M == 0);
    CHECK(out.selected_L == 0);
    CHECK(out.gamma(d.features.row(3)) > 0.0);
}
