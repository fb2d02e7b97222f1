#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tailboost/types.hpp"

namespace tailboost {

/// Transformed exceedance residuals (y_i/u)^(-1/gamma(x_i)), strictly
/// inside (0,1) when the model fits.
struct UniformResiduals {
    std::vector<double> values;
};

/// One residual per exceedance, in input row order.
UniformResiduals u_transform(const Dataset& data, const GammaFn& gamma_of_x,
                             const ThresholdSpec& t);

struct Discrepancies {
    double d1 = 0.0;  // Cramer-von-Mises-type mean squared gap
    double d2 = 0.0;  // Kolmogorov-Smirnov-type sup gap at sample points
    double d3 = 0.0;  // Anderson-Darling-type weighted mean squared gap
};

/// Gaps between each residual and the right-continuous empirical CDF
/// evaluated at it, F_k(t) = #{u_j <= t}/k.
Discrepancies discrepancies(const UniformResiduals& res);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

/// Exact two-sided KS statistic against Uniform(0,1) via order statistics,
/// with the asymptotic Kolmogorov p-value at sqrt(k) * statistic.
KsResult ks_uniform_test(const UniformResiduals& res);

/// Complementary CDF of the limiting Kolmogorov distribution,
/// Q(lambda) = 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2),
/// series truncated once a term drops below 1e-10.
double kolmogorov_survival(double lambda);

enum class Measure { d1, d2, d3, sum };

Measure measure_from_string(const std::string& s);

/// What a threshold-scan fitter returns for one candidate threshold: the
/// fitted surface plus whichever tuning triple it selected (zeros when the
/// fitter has no such notion, e.g. a parametric baseline).
struct ThresholdFit {
    GammaFn gamma;
    std::size_t selected_M = 0;
    double selected_nu = 0.0;
    std::size_t selected_L = 0;
};

using ThresholdFitter = std::function<ThresholdFit(const Dataset&, const ThresholdSpec&)>;

struct DiscrepancyReport {
    double q = 0.0;
    double u = 0.0;
    std::size_t k = 0;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    std::size_t selected_M = 0;
    double selected_nu = 0.0;
    std::size_t selected_L = 0;
};

struct ScanResult {
    std::vector<DiscrepancyReport> reports;  // feasible grid points, ascending q
    std::size_t best_index = 0;
    double best_q = 0.0;
    double best_u = 0.0;
};

/// Evaluates the fitter at every feasible tail fraction in q_grid and picks
/// the one minimizing the chosen discrepancy measure (ties: smallest q).
/// Grid points with fewer than k_min exceedances, or where the fit fails,
/// are skipped with a warning on stderr. Throws InfeasibleError when no
/// point survives.
ScanResult scan_thresholds(const Dataset& data, const ThresholdFitter& fitter,
                           std::span<const double> q_grid, Measure measure,
                           std::size_t k_min = 20, std::size_t n_threads = 0);

/// {0.005, 0.010, ..., 0.995}.
std::vector<double> default_q_grid();

}  // namespace tailboost
