#pragma once

#include <cstdint>
#include <vector>

#include "tailboost/booster.hpp"
#include "tailboost/threshold.hpp"
#include "tailboost/types.hpp"

namespace tailboost {

/// K-fold cross-validation grid over (shrinkage nu, leaves L) with the tree
/// count M selected along the whole validation-loss curve up to M_max.
struct TuneGrid {
    std::vector<double> nu_values{0.005, 0.0075, 0.01, 0.05, 0.1};
    std::vector<std::size_t> L_values{2, 3, 4, 8};
    std::size_t M_max = 1000;
    std::size_t folds = 5;  // K
    std::uint64_t seed = 0;

    void validate() const;
};

/// Validation-loss curve of one (nu, L) cell, summed over folds; curve[m]
/// is the loss of the m-tree truncation, curve[0] the Hill constant.
struct CvCell {
    double nu = 0.0;
    std::size_t L = 0;
    std::size_t best_m = 0;
    std::vector<double> curve;
};

struct TuneResult {
    std::size_t best_M = 0;
    double best_nu = 0.0;
    std::size_t best_L = 0;
    double best_loss = 0.0;
    std::vector<CvCell> cells;              // grid order: nu-major, L-minor
    std::vector<std::size_t> fold_of_row;   // the seeded stratified partition
};

/// Folds are a seeded shuffle stratified on the exceedance indicator, so
/// per-fold exceedance counts differ by at most one. The threshold u is the
/// caller's (computed once from the full responses); each training subset
/// recounts its own exceedances against it. Ties in the summed curve pick
/// the smallest M; ties across cells pick smaller L, then smaller nu, then
/// smaller M. `base` supplies the non-tuned fit options (min_leaf, clamps).
TuneResult cv_tune(const Dataset& data, const ThresholdSpec& t, const TuneGrid& grid,
                   const BoostConfig& base = {}, std::size_t n_threads = 0);

/// Threshold-scan fitter that re-tunes (M, nu, L) by CV at every candidate
/// threshold and fits the final model on the full data. When freeze_tuning
/// is set, the triple is tuned once (at the first threshold seen) and reused.
ThresholdFitter make_cv_fitter(const TuneGrid& grid, const BoostConfig& base = {},
                               bool freeze_tuning = false);

}  // namespace tailboost
