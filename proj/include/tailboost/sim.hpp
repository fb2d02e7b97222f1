#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailboost/baseline.hpp"
#include "tailboost/booster.hpp"
#include "tailboost/rng.hpp"
#include "tailboost/threshold.hpp"
#include "tailboost/tuning.hpp"
#include "tailboost/types.hpp"

namespace tailboost {

/// The response law 1 - F(y|x) = (1+m) / (y^(1/gamma(x)) + m) keeps gamma(x)
/// as the extreme value index (Hall class, support [1, inf)). `as_printed`
/// instead inverts the displayed variant 1 - F = (1+m) y / (y^(1/gamma) + m y),
/// whose tail exponent is 1/gamma - 1; it is only proper for gamma < 1.
enum class DgpVariant { corrected, as_printed };

DgpVariant dgp_variant_from_string(const std::string& s);

struct SimConfig {
    int scenario = 1;               // generative case, 1..5
    std::size_t n_train = 1000;     // n
    std::size_t n_test = 1000;      // n*
    std::size_t n_features = 10;    // p
    double m = 0.10;                // second-order parameter
    double C = 1.0 / 3.0;           // scale of cases 1..3
    std::vector<double> q_list{0.1, 0.05, 0.025};
    bool optimal_q = false;         // also run the scanned q* per replicate
    std::size_t replications = 100; // R
    std::uint64_t seed = 0;
    DgpVariant variant = DgpVariant::corrected;

    TuneGrid tune;       // CV grid for the boosted fit
    BoostConfig base;    // non-tuned fit options
    TirOptions tir;

    void validate() const;
};

/// Gaussian copula covariates: latent AR(1) normals with lag-half
/// correlation 1/2^|j-k|, mapped through Phi and rescaled to uniform on
/// (-sqrt(3), sqrt(3)) so every column has unit variance.
Matrix gen_covariates(std::size_t n, std::size_t p, std::uint64_t seed);
Matrix gen_covariates(std::size_t n, std::size_t p, Rng& rng);

/// The five generative tail-index surfaces. Case 5's differences enter as
/// absolute values floored at 1e-6, and the result is floored at the
/// smallest positive normal, keeping the return value positive where the
/// printed formula is undefined or underflows.
double gamma_case(int scenario, std::span<const double> x, double C);

/// Inverse-CDF sampling of the response given gamma and u01 in (0,1).
double sample_response(double gamma, double m, double u01, DgpVariant variant);

/// Accurate standard normal CDF (via erfc).
double normal_cdf(double z);

/// Mean squared error between an estimate and the generative surface.
double mean_squared_error(std::span<const double> estimate, std::span<const double> truth);

struct MethodSummary {
    std::vector<double> deltas;  // one squared-error mean per replicate; NaN = missing
    double median = 0.0;
    std::size_t n_missing = 0;
};

struct QResult {
    std::string q_label;  // "0.1", ..., or "qstar"
    double q = 0.0;       // nominal fraction; for qstar, the median scanned q
    MethodSummary boost;
    MethodSummary tir;
    double efficiency = 0.0;  // median(delta_tir) / median(delta_boost)
};

struct ExperimentReport {
    SimConfig config;
    std::vector<QResult> results;
};

/// Runs the full train/test protocol R times: fresh samples per replicate,
/// threshold at each q, CV-tuned boosted fit and parametric baseline fit,
/// mean squared error of each against the generative gamma on the test
/// sample, medians and the efficiency ratio across replicates. Replicates
/// run in parallel on derived seeds; the report does not depend on the
/// thread count. Baseline non-convergence is recorded as missing.
ExperimentReport run_experiment(const SimConfig& cfg, std::size_t n_threads = 0);

/// The tail fraction minimizing d1 + d2 + d3 (delegates to scan_thresholds).
double optimal_fraction(const Dataset& train, const ThresholdFitter& fitter,
                        std::span<const double> q_grid, std::size_t k_min = 20);

}  // namespace tailboost
