#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tailboost/types.hpp"

namespace tailboost {

/// One node of a regression tree. feature < 0 marks a leaf. Internal nodes
/// route x[feature] <= threshold to `left`, else to `right`, and record the
/// squared-error reduction achieved by their split.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // leaf prediction
    double gain = 0.0;   // SSE reduction recorded when the split was made
    std::int64_t count = 0;

    bool is_leaf() const { return feature < 0; }
};

/// Binary regression tree with axis-aligned splits; piecewise-constant
/// prediction. Immutable after growth, safe to share across threads.
class RegressionTree {
public:
    double predict(std::span<const double> x) const;

    /// Index (into nodes()) of the leaf whose region contains x.
    std::int32_t leaf_index(std::span<const double> x) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t n_leaves() const { return n_leaves_; }
    std::size_t n_features() const { return n_features_; }

    // Used by growth and deserialization.
    std::vector<TreeNode> nodes_;
    std::size_t n_leaves_ = 0;
    std::size_t n_features_ = 0;
};

/// Grows least-squares trees over a fixed row set. The per-feature sort
/// order is computed once, so repeated calls with fresh targets (one per
/// boosting iteration) skip the O(n log n) work.
class TreeGrower {
public:
    explicit TreeGrower(const Matrix& features);

    /// Best-first growth: repeatedly split the leaf whose best split gives
    /// the largest SSE reduction, until max_leaves is reached or no split
    /// reduces the SSE by > 0. Candidate thresholds are midpoints between
    /// consecutive distinct sorted feature values; both children must keep
    /// at least min_leaf rows. Ties are broken by lowest feature index,
    /// then smallest threshold. Leaf values are the target means.
    RegressionTree grow(std::span<const double> targets, std::size_t max_leaves,
                        std::size_t min_leaf) const;

private:
    const Matrix& features_;
    std::vector<std::vector<std::uint32_t>> order_;  // per-feature row order
};

/// One-shot convenience wrapper around TreeGrower.
RegressionTree grow(const Matrix& features, std::span<const double> targets,
                    std::size_t max_leaves, std::size_t min_leaf = 5);

/// Replaces each leaf value with the Newton step
///   sum(gradients in leaf) / sum(hessians in leaf),
/// routing the training rows through the tree. Leaves whose summed hessian
/// is <= 1e-12 get value 0.
RegressionTree newton_leaf_values(RegressionTree tree, const Matrix& features,
                                  std::span<const double> gradients,
                                  std::span<const double> hessians);

inline constexpr double kNewtonDenomEps = 1e-12;

}  // namespace tailboost
