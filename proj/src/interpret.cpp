#include "tailboost/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailboost/parallel.hpp"
#include "tailboost/rng.hpp"

namespace tailboost {

std::vector<double> importance(const GammaEnsemble& model) {
    if (model.trees.empty()) throw InfeasibleError("importance: model has no trees");
    std::vector<double> total(model.n_features, 0.0);
    for (const RegressionTree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes()) {
            if (!node.is_leaf()) total[static_cast<std::size_t>(node.feature)] += node.gain;
        }
    }
    const double m = static_cast<double>(model.trees.size());
    for (double& v : total) v /= m;
    return total;
}

ImportanceReport modified_importance(const Dataset& data, const ThresholdSpec& t,
                                     const BoostConfig& cfg, std::size_t repeats,
                                     std::size_t n_threads) {
    data.validate();
    if (repeats == 0) throw InfeasibleError("modified importance: need at least one repeat");

    const std::size_t n = data.size();
    const std::size_t p = data.n_features();

    ImportanceReport report;
    report.repeats = repeats;
    report.raw = importance(fit(data, t, cfg));

    std::vector<std::vector<double>> per_repeat(repeats);
    parallel_for(repeats, n_threads, [&](std::size_t r) {
        // One whole-row shuffle per repeat: the shadow block keeps the
        // original cross-column dependence but loses any link to y.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        Rng rng(derive_seed(cfg.seed, 0xada9 + r));
        rng.shuffle(perm);

        Dataset bound;
        bound.features = Matrix(n, 2 * p);
        bound.responses = data.responses;
        for (std::size_t i = 0; i < n; ++i) {
            const auto orig = data.features.row(i);
            const auto shadow = data.features.row(perm[i]);
            auto dst = bound.features.row(i);
            std::copy(orig.begin(), orig.end(), dst.begin());
            std::copy(shadow.begin(), shadow.end(), dst.begin() + static_cast<std::ptrdiff_t>(p));
        }
        per_repeat[r] = importance(fit(bound, t, cfg));
    });

    // corrected importance: mean original-block importance minus mean
    // shadow-block importance, feature by feature
    report.corrected.assign(p, 0.0);
    for (std::size_t r = 0; r < repeats; ++r) {
        for (std::size_t i = 0; i < p; ++i) {
            report.corrected[i] += per_repeat[r][i] - per_repeat[r][p + i];
        }
    }
    for (double& v : report.corrected) v /= static_cast<double>(repeats);
    return report;
}

PdpCurve partial_dependence(const GammaEnsemble& model, const Dataset& data,
                            std::span<const std::size_t> s,
                            const std::vector<std::vector<double>>& grid) {
    data.validate();
    if (s.empty()) throw InfeasibleError("partial dependence: empty feature subset");
    if (grid.empty()) throw InfeasibleError("partial dependence: empty grid");
    for (std::size_t f : s) {
        if (f >= model.n_features) {
            throw std::invalid_argument("partial dependence: feature index out of range");
        }
    }

    PdpCurve curve;
    curve.features.assign(s.begin(), s.end());
    curve.grid = grid;
    curve.values.reserve(grid.size());

    std::vector<double> x(model.n_features);
    for (const std::vector<double>& point : grid) {
        if (point.size() != s.size()) {
            throw std::invalid_argument("partial dependence: grid point has wrong dimension");
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto row = data.features.row(i);
            std::copy(row.begin(), row.end(), x.begin());
            for (std::size_t j = 0; j < s.size(); ++j) x[s[j]] = point[j];
            sum += model.predict(x);
        }
        curve.values.push_back(sum / static_cast<double>(data.size()));
    }
    return curve;
}

PdpCurve partial_dependence(const GammaEnsemble& model, const Dataset& data,
                            std::size_t feature, std::span<const double> grid) {
    std::vector<std::vector<double>> points;
    points.reserve(grid.size());
    for (double g : grid) points.push_back({g});
    const std::size_t s[1] = {feature};
    return partial_dependence(model, data, s, points);
}

std::vector<double> default_pdp_grid(const Dataset& data, std::size_t feature,
                                     std::size_t n_points) {
    if (feature >= data.n_features()) {
        throw std::invalid_argument("pdp grid: feature index out of range");
    }
    if (n_points < 2) throw InfeasibleError("pdp grid: need at least two points");
    std::vector<double> column(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) column[i] = data.features(i, feature);
    std::sort(column.begin(), column.end());
    auto order_stat = [&](double pct) {
        auto rank = static_cast<std::size_t>(
            std::ceil(pct * static_cast<double>(column.size())));
        rank = std::min(std::max<std::size_t>(rank, 1), column.size());
        return column[rank - 1];
    };
    const double lo = order_stat(0.01);
    const double hi = order_stat(0.99);
    std::vector<double> grid(n_points);
    for (std::size_t i = 0; i + 1 < n_points; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
    }
    grid.back() = hi;  // exact endpoint
    return grid;
}

}  // namespace tailboost
