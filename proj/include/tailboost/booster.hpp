#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tailboost/tree.hpp"
#include "tailboost/types.hpp"

namespace tailboost {

/// Knobs for the stagewise fit: M trees of L leaves each, added with
/// shrinkage nu, predictions clamped into [clamp_lo, clamp_hi] after every
/// additive update.
struct BoostConfig {
    std::size_t n_trees = 0;  // M
    double shrinkage = 0.01;  // nu in (0, 1]
    std::size_t n_leaves = 2; // L >= 2
    std::size_t min_leaf = 5;
    double clamp_lo = 1e-6;
    double clamp_hi = 1e6;
    std::uint64_t seed = 0;
    // Grow trees on all n rows instead of exceedances only. Rows below the
    // threshold carry zero gradient and hessian either way; this switch only
    // changes the split criterion's sample.
    bool fit_on_all_rows = false;
    std::size_t max_trees = 100000;

    void validate() const;
};

/// Additive tail-index model: constant initializer gamma0 plus shrunken
/// regression trees. Evaluation is gamma0 followed by one clamped additive
/// update per tree, so replaying the stored trees reproduces the training
/// predictions exactly.
struct GammaEnsemble {
    double gamma0 = 0.0;
    double shrinkage = 0.0;
    double clamp_lo = 1e-6;
    double clamp_hi = 1e6;
    ThresholdSpec threshold;
    std::size_t n_features = 0;
    std::vector<std::string> feature_names;
    // Optional per-feature affine preprocessing recorded at fit time
    // (min-max normalization); empty when inputs are used as-is.
    std::vector<double> norm_min, norm_max;

    std::vector<RegressionTree> trees;

    double predict(std::span<const double> x) const;
    std::vector<double> predict_all(const Matrix& features) const;

    /// View of predict(); the ensemble must outlive the returned callable.
    GammaFn as_fn() const;
};

/// Called after each boosting iteration with the 1-based iteration index and
/// the tree just appended (after its Newton leaf values were assigned).
using TreeObserver = std::function<void(std::size_t, const RegressionTree&)>;

/// Stagewise fit: gamma0 is the clamped Hill estimate; each iteration grows
/// an L-leaf least-squares tree on the current negative gradients, assigns
/// single-Newton-step leaf values from the current gradients and hessians,
/// and updates the cached per-row predictions with shrinkage and clamping.
GammaEnsemble fit(const Dataset& data, const ThresholdSpec& t, const BoostConfig& cfg,
                  const TreeObserver& observer = {});

/// Training-style loss curve: entry m is the summed deviance of the ensemble
/// truncated to its first m trees (entry 0 uses gamma0 alone).
std::vector<double> loss_path(const GammaEnsemble& model, const Dataset& data);

/// Versioned flat text serialization; all reals are hexadecimal floats, so
/// save/load round-trips are bit-exact.
void save_model(const GammaEnsemble& model, std::ostream& out);
void save_model(const GammaEnsemble& model, const std::string& path);
GammaEnsemble load_model(std::istream& in);
GammaEnsemble load_model(const std::string& path);

}  // namespace tailboost
