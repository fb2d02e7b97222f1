#pragma once

#include <cmath>
#include <stdexcept>

#include "tailboost/types.hpp"

namespace tailboost {

namespace detail {
inline void check_loss_domain(double gamma, double u) {
    if (!(gamma > 0.0)) throw std::domain_error("loss: gamma must be positive");
    if (!(u > 0.0)) throw std::domain_error("loss: threshold u must be positive");
}
}  // namespace detail

/// Pareto deviance of one observation over threshold u:
///   (log(y/u)/gamma + log(gamma)) * 1{y > u}.
/// Exactly zero (not approximately) when y <= u.
inline double psi(double y, double gamma, double u) {
    detail::check_loss_domain(gamma, u);
    if (!(y > u)) return 0.0;
    return std::log(y / u) / gamma + std::log(gamma);
}

/// -dPsi/dgamma = ((log(y/u) - gamma) / gamma^2) * 1{y > u}.
inline double neg_gradient(double y, double gamma, double u) {
    detail::check_loss_domain(gamma, u);
    if (!(y > u)) return 0.0;
    return (std::log(y / u) - gamma) / (gamma * gamma);
}

/// d^2Psi/dgamma^2, written as 2*neg_gradient/gamma + 1/gamma^2 for y > u;
/// equals 2*log(y/u)/gamma^3 - 1/gamma^2. Zero when y <= u.
inline double hessian_term(double y, double gamma, double u) {
    detail::check_loss_domain(gamma, u);
    if (!(y > u)) return 0.0;
    return 2.0 * neg_gradient(y, gamma, u) / gamma + 1.0 / (gamma * gamma);
}

/// Hill estimator over the exceedances: mean of log(y_i/u) for y_i > u.
/// This is the argmin over constant gamma of the summed deviance.
double hill_init(std::span<const double> responses, const ThresholdSpec& t);
double hill_init(const Dataset& data, const ThresholdSpec& t);

/// Summed deviance of gamma(.) over all rows (non-exceedances contribute 0).
double total_loss(const Dataset& data, const GammaFn& gamma_of_x, const ThresholdSpec& t);

}  // namespace tailboost
