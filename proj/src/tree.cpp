#include "tailboost/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace tailboost {

double RegressionTree::predict(std::span<const double> x) const {
    return nodes_[static_cast<std::size_t>(leaf_index(x))].value;
}

std::int32_t RegressionTree::leaf_index(std::span<const double> x) const {
    if (x.size() != n_features_) {
        throw std::invalid_argument("tree: feature vector has wrong dimension");
    }
    std::int32_t id = 0;
    while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
        id = (x[static_cast<std::size_t>(n.feature)] <= n.threshold) ? n.left : n.right;
    }
    return id;
}

TreeGrower::TreeGrower(const Matrix& features) : features_(features) {
    const std::size_t n = features.rows();
    const std::size_t p = features.cols();
    order_.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
        auto& ord = order_[f];
        ord.resize(n);
        std::iota(ord.begin(), ord.end(), 0u);
        std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = features(a, f), vb = features(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
    }
}

namespace {

struct BestSplit {
    double gain = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;

    bool found() const { return feature >= 0; }
};

// Candidate threshold between adjacent distinct values a < b. The midpoint
// can round up to b; fall back to a so that training rows with value <= a
// are exactly the intended left group.
inline double split_point(double a, double b) {
    const double t = 0.5 * (a + b);
    return (t < b) ? t : a;
}

struct PendingNode {
    double gain;
    std::int32_t node_id;
    BestSplit split;
};

struct PendingOrder {
    bool operator()(const PendingNode& a, const PendingNode& b) const {
        if (a.gain != b.gain) return a.gain < b.gain;  // max-heap on gain
        return a.node_id > b.node_id;                  // then oldest node first
    }
};

}  // namespace

RegressionTree TreeGrower::grow(std::span<const double> targets, std::size_t max_leaves,
                                std::size_t min_leaf) const {
    const std::size_t n = features_.rows();
    const std::size_t p = features_.cols();
    if (n == 0) throw std::invalid_argument("grow: no rows");
    if (targets.size() != n) throw std::invalid_argument("grow: target length mismatch");
    if (max_leaves < 1) throw std::invalid_argument("grow: max_leaves must be >= 1");
    min_leaf = std::max<std::size_t>(min_leaf, 1);
    for (double t : targets) {
        if (!std::isfinite(t)) throw NumericError("grow: non-finite target");
    }

    // node membership: which tree node currently owns each row
    std::vector<std::int32_t> node_of(n, 0);

    RegressionTree tree;
    tree.n_features_ = p;
    tree.nodes_.reserve(2 * max_leaves);

    // Node sums are accumulated in original row order; split scans use the
    // per-feature sorted order. Keeping both conventions fixed makes gains
    // reproducible bit-for-bit.
    auto node_sum_count = [&](std::int32_t id) {
        double s = 0.0;
        std::int64_t c = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (node_of[r] == id) {
                s += targets[r];
                ++c;
            }
        }
        return std::pair<double, std::int64_t>(s, c);
    };

    auto best_split = [&](std::int32_t id, double total, std::int64_t count) -> BestSplit {
        BestSplit best;
        if (count < static_cast<std::int64_t>(2 * min_leaf)) return best;
        // A node with a single distinct target value cannot gain.
        {
            bool first = true;
            double lo = 0.0, hi = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                if (node_of[r] != id) continue;
                const double t = targets[r];
                if (first) {
                    lo = hi = t;
                    first = false;
                } else {
                    lo = std::min(lo, t);
                    hi = std::max(hi, t);
                }
            }
            if (lo == hi) return best;
        }
        const double nd = static_cast<double>(count);
        const double parent_term = total * total / nd;
        for (std::size_t f = 0; f < p; ++f) {
            double left_sum = 0.0;
            std::int64_t left_count = 0;
            double prev = 0.0;
            for (std::uint32_t r : order_[f]) {
                if (node_of[r] != static_cast<std::int32_t>(id)) continue;
                const double v = features_(r, f);
                if (left_count > 0 && v > prev) {
                    const std::int64_t right_count = count - left_count;
                    if (left_count >= static_cast<std::int64_t>(min_leaf) &&
                        right_count >= static_cast<std::int64_t>(min_leaf)) {
                        const double rs = total - left_sum;
                        const double gain = left_sum * left_sum / static_cast<double>(left_count) +
                                            rs * rs / static_cast<double>(right_count) - parent_term;
                        if (gain > best.gain) {
                            best.gain = gain;
                            best.feature = static_cast<std::int32_t>(f);
                            best.threshold = split_point(prev, v);
                        }
                    }
                }
                left_sum += targets[r];
                ++left_count;
                prev = v;
            }
        }
        return best;
    };

    std::priority_queue<PendingNode, std::vector<PendingNode>, PendingOrder> queue;
    {
        auto [s, c] = node_sum_count(0);
        TreeNode root;
        root.count = c;
        root.value = s / static_cast<double>(c);
        tree.nodes_.push_back(root);
        tree.n_leaves_ = 1;
        BestSplit b = best_split(0, s, c);
        if (b.found() && b.gain > 0.0) queue.push({b.gain, 0, b});
    }

    while (tree.n_leaves_ < max_leaves && !queue.empty()) {
        const PendingNode top = queue.top();
        queue.pop();

        const std::int32_t left_id = static_cast<std::int32_t>(tree.nodes_.size());
        const std::int32_t right_id = left_id + 1;
        {
            TreeNode& parent = tree.nodes_[static_cast<std::size_t>(top.node_id)];
            parent.feature = top.split.feature;
            parent.threshold = top.split.threshold;
            parent.gain = top.split.gain;
            parent.left = left_id;
            parent.right = right_id;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (node_of[r] != top.node_id) continue;
            const double v = features_(r, static_cast<std::size_t>(top.split.feature));
            node_of[r] = (v <= top.split.threshold) ? left_id : right_id;
        }
        for (std::int32_t child : {left_id, right_id}) {
            auto [s, c] = node_sum_count(child);
            TreeNode node;
            node.count = c;
            node.value = s / static_cast<double>(c);
            tree.nodes_.push_back(node);
            BestSplit b = best_split(child, s, c);
            if (b.found() && b.gain > 0.0) queue.push({b.gain, child, b});
        }
        ++tree.n_leaves_;
    }

    return tree;
}

RegressionTree grow(const Matrix& features, std::span<const double> targets,
                    std::size_t max_leaves, std::size_t min_leaf) {
    return TreeGrower(features).grow(targets, max_leaves, min_leaf);
}

RegressionTree newton_leaf_values(RegressionTree tree, const Matrix& features,
                                  std::span<const double> gradients,
                                  std::span<const double> hessians) {
    if (features.rows() != gradients.size() || gradients.size() != hessians.size()) {
        throw std::invalid_argument("newton_leaf_values: length mismatch");
    }
    std::vector<double> gsum(tree.nodes_.size(), 0.0);
    std::vector<double> hsum(tree.nodes_.size(), 0.0);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto leaf = static_cast<std::size_t>(tree.leaf_index(features.row(r)));
        gsum[leaf] += gradients[r];
        hsum[leaf] += hessians[r];
    }
    for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
        TreeNode& node = tree.nodes_[i];
        if (!node.is_leaf()) continue;
        node.value = (hsum[i] <= kNewtonDenomEps) ? 0.0 : gsum[i] / hsum[i];
    }
    return tree;
}

}  // namespace tailboost
