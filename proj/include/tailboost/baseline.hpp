#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tailboost/threshold.hpp"
#include "tailboost/types.hpp"

namespace tailboost {

/// Exponentially-linear tail index regression: gamma(x) = exp(theta0 + theta'x).
struct TirModel {
    std::vector<double> theta;  // intercept first, size p + 1
    ThresholdSpec threshold;

    GammaFn as_fn() const;
};

struct TirOptions {
    double tol = 1e-8;          // infinity-norm of the loss gradient
    std::size_t max_iter = 200;
};

/// Maximum likelihood fit of the exceedance deviance under the
/// exponentially-linear form, by damped Newton iterations with step halving.
/// Initialized at theta = (log Hill, 0, ..., 0). The objective is convex in
/// theta (every exceedance has log(y/u) > 0), so descent steps suffice; a
/// singular Newton system falls back to a gradient step.
TirModel fit_tir(const Dataset& data, const ThresholdSpec& t, const TirOptions& opts = {});

double predict_tir(const TirModel& model, std::span<const double> x);

/// The constant Hill estimator (same contract as hill_init; exposed here for
/// baseline reporting).
double hill(const Dataset& data, const ThresholdSpec& t);

/// Threshold-scan fitter backed by the parametric baseline.
ThresholdFitter make_tir_fitter(const TirOptions& opts = {});

}  // namespace tailboost
