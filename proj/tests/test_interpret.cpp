#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tailboost/interpret.hpp"
#include "tailboost/rng.hpp"
#include "tailboost/sim.hpp"

using namespace tailboost;

namespace {

Dataset case1_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.features = gen_covariates(n, 10, rng);
    d.responses.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double gamma = gamma_case(1, d.features.row(i), 1.0 / 3.0);
        d.responses[i] = sample_response(gamma, 0.10, rng.uniform01(), DgpVariant::corrected);
    }
    return d;
}

GammaEnsemble single_tree_model(RegressionTree tree, double gamma0 = 1.0, double nu = 1.0) {
    GammaEnsemble model;
    model.gamma0 = gamma0;
    model.shrinkage = nu;
    model.n_features = tree.n_features();
    model.trees.push_back(std::move(tree));
    return model;
}

}  // namespace

TEST_CASE("importance credits only the splitting features") {
    Matrix x(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        x(i, 0) = 0.5;                          // constant: never splittable
        x(i, 1) = static_cast<double>(i + 1);   // carries the signal
        x(i, 2) = 0.1 * static_cast<double>(i); // correlated but loses ties
    }
    const std::vector<double> targets = {0.0, 0.0, 10.0, 10.0};
    RegressionTree tree = grow(x, targets, 2, 1);
    REQUIRE(tree.n_leaves() == 2);

    const std::vector<double> imp = importance(single_tree_model(tree));
    CHECK(imp[0] == 0.0);
    CHECK(imp[1] == doctest::Approx(100.0));
    CHECK(imp[2] == 0.0);
}

TEST_CASE("importance is the mean of recorded gains over trees") {
    Dataset d = case1_data(600, 71);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.2);
    BoostConfig cfg;
    cfg.n_trees = 30;
    cfg.shrinkage = 0.1;
    cfg.n_leaves = 3;
    const GammaEnsemble model = fit(d, t, cfg);
    const std::vector<double> imp = importance(model);

    // oracle: recompute the sum of gains feature-by-feature
    std::vector<double> want(model.n_features, 0.0);
    double total_gain = 0.0;
    for (const RegressionTree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes()) {
            if (!node.is_leaf()) {
                want[static_cast<std::size_t>(node.feature)] += node.gain;
                total_gain += node.gain;
            }
        }
    }
    double imp_sum = 0.0;
    for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(imp[j] == doctest::Approx(want[j] / 30.0).epsilon(1e-14));
        CHECK(imp[j] >= 0.0);
        imp_sum += imp[j];
    }
    CHECK(imp_sum == doctest::Approx(total_gain / 30.0).epsilon(1e-12));
}

TEST_CASE("recorded gains equal the SSE reductions recomputed from the data") {
    Rng rng(72);
    Matrix x(150, 3);
    std::vector<double> targets(150);
    for (std::size_t i = 0; i < 150; ++i) {
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.uniform01();
        targets[i] = std::cos(5.0 * x(i, 0)) + x(i, 1) - 0.5 * x(i, 2) + 0.05 * rng.uniform01();
    }
    RegressionTree tree = grow(x, targets, 6, 5);

    // route every row down the tree, collecting per-node target lists
    std::vector<std::vector<double>> node_targets(tree.nodes().size());
    for (std::size_t r = 0; r < 150; ++r) {
        std::int32_t id = 0;
        for (;;) {
            node_targets[static_cast<std::size_t>(id)].push_back(targets[r]);
            const TreeNode& node = tree.nodes()[static_cast<std::size_t>(id)];
            if (node.is_leaf()) break;
            id = (x(r, static_cast<std::size_t>(node.feature)) <= node.threshold) ? node.left
                                                                                  : node.right;
        }
    }
    auto sse = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double out = 0.0;
        for (double t : v) out += (t - mean) * (t - mean);
        return out;
    };
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const TreeNode& node = tree.nodes()[i];
        if (node.is_leaf()) continue;
        const double drop = sse(node_targets[i]) -
                            sse(node_targets[static_cast<std::size_t>(node.left)]) -
                            sse(node_targets[static_cast<std::size_t>(node.right)]);
        CHECK(oracles::rel_err(node.gain, drop) < 1e-8);
    }
}

TEST_CASE("one shadow repeat is exactly one difference") {
    Dataset d = case1_data(300, 73);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.2);
    BoostConfig cfg;
    cfg.n_trees = 15;
    cfg.shrinkage = 0.1;
    cfg.seed = 404;
    const ImportanceReport report = modified_importance(d, t, cfg, 1);
    REQUIRE(report.repeats == 1);

    // reproduce the single repeat: same derived permutation, same fit
    const std::size_t n = d.size(), p = d.n_features();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(derive_seed(cfg.seed, 0xada9));
    rng.shuffle(perm);
    Dataset bound;
    bound.features = Matrix(n, 2 * p);
    bound.responses = d.responses;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            bound.features(i, j) = d.features(i, j);
            bound.features(i, p + j) = d.features(perm[i], j);
        }
    }
    const std::vector<double> both = importance(fit(bound, t, cfg));
    for (std::size_t j = 0; j < p; ++j) {
        CHECK(report.corrected[j] == both[j] - both[p + j]);
    }
}

TEST_CASE("shadow correction zeroes out an irrelevant feature") {
    Dataset d = case1_data(800, 74);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.15);
    BoostConfig cfg;
    cfg.n_trees = 100;
    cfg.shrinkage = 0.05;
    cfg.n_leaves = 2;
    cfg.seed = 9;
    const ImportanceReport report = modified_importance(d, t, cfg, 3);

    // only x1..x3 drive the case-1 surface
    const double strongest =
        std::max({report.corrected[0], report.corrected[1], report.corrected[2]});
    CHECK(strongest > 0.0);
    for (std::size_t j = 3; j < 10; ++j) {
        CHECK(std::abs(report.corrected[j]) < 0.10 * strongest);
    }
}

TEST_CASE("partial dependence of a constant model is flat") {
    GammaEnsemble model;
    model.gamma0 = 0.75;  // dyadic: the row average is exact
    model.shrinkage = 0.1;
    model.n_features = 2;
    Dataset d;
    d.features = Matrix(20, 2, 0.3);
    d.responses.assign(20, 2.0);
    const double grid[3] = {-1.0, 0.0, 1.0};
    const PdpCurve curve = partial_dependence(model, d, 0, grid);
    REQUIRE(curve.values.size() == 3);
    for (double v : curve.values) CHECK(v == 0.75);
}

TEST_CASE("partial dependence steps exactly at the split threshold") {
    Matrix x(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        x(i, 0) = static_cast<double>(i + 1);
        x(i, 1) = 0.5;
    }
    const std::vector<double> targets = {0.0, 0.0, 10.0, 10.0};
    RegressionTree tree = grow(x, targets, 2, 1);  // splits feature 0 at 2.5
    const GammaEnsemble model = single_tree_model(std::move(tree), 1.0, 0.1);

    Dataset d;
    d.features = x;
    d.responses = {9.0, 9.0, 9.0, 9.0};
    const double grid[4] = {2.0, 2.5, 2.5000001, 3.0};
    const PdpCurve curve = partial_dependence(model, d, 0, grid);
    CHECK(curve.values[0] == curve.values[1]);  // left of and at the threshold
    CHECK(curve.values[2] == curve.values[3]);  // strictly right of it
    CHECK(curve.values[0] == doctest::Approx(1.0));
    CHECK(curve.values[2] == doctest::Approx(2.0));

    // a model that never splits on feature 1 is flat along it
    const double grid1[3] = {0.0, 0.5, 1.0};
    const PdpCurve flat = partial_dependence(model, d, 1, grid1);
    CHECK(flat.values[0] == flat.values[1]);
    CHECK(flat.values[1] == flat.values[2]);
}

TEST_CASE("partial dependence matches the double-loop oracle") {
    Dataset d = case1_data(50, 75);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.3);
    BoostConfig cfg;
    cfg.n_trees = 12;
    cfg.shrinkage = 0.2;
    cfg.n_leaves = 3;
    const GammaEnsemble model = fit(d, t, cfg);

    const std::vector<std::size_t> s = {1, 4};
    std::vector<std::vector<double>> grid;
    Rng rng(76);
    for (int g = 0; g < 15; ++g) {
        grid.push_back({3.4 * rng.uniform01() - 1.7, 3.4 * rng.uniform01() - 1.7});
    }
    const PdpCurve curve = partial_dependence(model, d, s, grid);

    for (std::size_t g = 0; g < grid.size(); ++g) {
        double want = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            std::vector<double> x(d.features.row(i).begin(), d.features.row(i).end());
            x[1] = grid[g][0];
            x[4] = grid[g][1];
            want += model.predict(x);
        }
        want /= static_cast<double>(d.size());
        CHECK(oracles::rel_err(curve.values[g], want) < 1e-12);
    }

    SUBCASE("row order does not matter") {
        std::vector<std::size_t> rows(d.size());
        std::iota(rows.begin(), rows.end(), 0u);
        Rng shuffle_rng(77);
        shuffle_rng.shuffle(rows);
        const Dataset shuffled = d.subset(rows);
        const PdpCurve again = partial_dependence(model, shuffled, s, grid);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            CHECK(oracles::rel_err(again.values[g], curve.values[g]) < 1e-12);
        }
    }
}

TEST_CASE("default pdp grid spans the inner percentiles") {
    Dataset d = case1_data(400, 78);
    const std::vector<double> grid = default_pdp_grid(d, 2, 50);
    REQUIRE(grid.size() == 50);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    std::vector<double> col(400);
    for (std::size_t i = 0; i < 400; ++i) col[i] = d.features(i, 2);
    std::sort(col.begin(), col.end());
    CHECK(grid.front() == col[3]);    // ceil(0.01 * 400) = 4th order statistic
    CHECK(grid.back() == col[395]);   // ceil(0.99 * 400) = 396th
}

TEST_CASE("interpret error paths") {
    GammaEnsemble empty;
    empty.n_features = 2;
    CHECK_THROWS_AS(importance(empty), InfeasibleError);

    Dataset d = case1_data(40, 79);
    const ThresholdSpec t = ThresholdSpec::from_fraction(d.responses, 0.4);
    BoostConfig cfg;
    cfg.n_trees = 2;
    CHECK_THROWS_AS(modified_importance(d, t, cfg, 0), InfeasibleError);

    const GammaEnsemble model = fit(d, t, cfg);
    const double grid[2] = {0.0, 1.0};
    const std::size_t bad_subset[1] = {10};
    std::vector<std::vector<double>> points = {{0.0}, {1.0}};
    CHECK_THROWS_AS(partial_dependence(model, d, bad_subset, points), std::invalid_argument);
    CHECK_THROWS_AS(partial_dependence(model, d, std::span<const std::size_t>{}, points),
                    InfeasibleError);
    (void)grid;
}
