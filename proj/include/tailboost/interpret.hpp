#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tailboost/booster.hpp"
#include "tailboost/types.hpp"

namespace tailboost {

/// Impurity importance: per tree, the recorded SSE reductions are summed
/// over the internal nodes splitting on each feature; the result is the
/// mean over trees. Zero for features never chosen.
std::vector<double> importance(const GammaEnsemble& model);

struct ImportanceReport {
    std::vector<double> raw;        // impurity importance of the original fit
    std::vector<double> corrected;  // shuffle-corrected (may be negative)
    std::size_t repeats = 0;        // R
};

/// Shuffle-corrected importance: each repeat row-permutes the design matrix
/// once (whole rows, columns kept aligned), fits on the column-bound n x 2p
/// design with the same (M, nu, L) and threshold, and uses the shadow
/// block's importance as a bias estimate.
ImportanceReport modified_importance(const Dataset& data, const ThresholdSpec& t,
                                     const BoostConfig& cfg, std::size_t repeats,
                                     std::size_t n_threads = 0);

struct PdpCurve {
    std::vector<std::size_t> features;      // the subset s
    std::vector<std::vector<double>> grid;  // one point per entry, size |s| each
    std::vector<double> values;
};

/// Partial dependence: for each grid point, the mean model prediction over
/// all rows with the s-coordinates overwritten by the point.
PdpCurve partial_dependence(const GammaEnsemble& model, const Dataset& data,
                            std::span<const std::size_t> s,
                            const std::vector<std::vector<double>>& grid);
PdpCurve partial_dependence(const GammaEnsemble& model, const Dataset& data,
                            std::size_t feature, std::span<const double> grid);

/// Equally spaced points between the feature's 1st and 99th percentiles.
std::vector<double> default_pdp_grid(const Dataset& data, std::size_t feature,
                                     std::size_t n_points = 50);

}  // namespace tailboost
