#include "tailboost/booster.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tailboost/loss.hpp"

namespace tailboost {

void BoostConfig::validate() const {
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
        throw InfeasibleError("boost: shrinkage must lie in (0, 1]");
    }
    if (n_leaves < 2) throw InfeasibleError("boost: trees need at least 2 terminal nodes");
    if (!(clamp_lo > 0.0 && clamp_lo < clamp_hi)) {
        throw InfeasibleError("boost: clamp bounds must satisfy 0 < lo < hi");
    }
    if (n_trees > max_trees) throw InfeasibleError("boost: tree count exceeds the configured maximum");
}

double GammaEnsemble::predict(std::span<const double> x) const {
    if (x.size() != n_features) {
        throw std::invalid_argument("predict: feature vector has wrong dimension");
    }
    std::vector<double> scratch;
    std::span<const double> z = x;
    if (!norm_min.empty()) {
        scratch.resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            scratch[j] = (x[j] - norm_min[j]) / (norm_max[j] - norm_min[j]);
        }
        z = scratch;
    }
    double acc = gamma0;
    for (const RegressionTree& tree : trees) {
        acc = std::clamp(acc + shrinkage * tree.predict(z), clamp_lo, clamp_hi);
    }
    return acc;
}

std::vector<double> GammaEnsemble::predict_all(const Matrix& features) const {
    std::vector<double> out(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) out[i] = predict(features.row(i));
    return out;
}

GammaFn GammaEnsemble::as_fn() const {
    return [this](std::span<const double> x) { return predict(x); };
}

GammaEnsemble fit(const Dataset& data, const ThresholdSpec& t, const BoostConfig& cfg,
                  const TreeObserver& observer) {
    data.validate();
    cfg.validate();
    if (t.k == 0) throw InfeasibleError("empty tail sample");

    const std::size_t n = data.size();
    std::vector<std::size_t> exceed;
    exceed.reserve(t.k);
    for (std::size_t i = 0; i < n; ++i) {
        if (data.responses[i] > t.u) exceed.push_back(i);
    }
    if (exceed.empty()) throw InfeasibleError("empty tail sample");

    // Rows the trees are grown on; exceedances only by default, since rows
    // below the threshold have zero gradient and hessian.
    const std::vector<std::size_t>* grow_rows = &exceed;
    std::vector<std::size_t> all_rows;
    if (cfg.fit_on_all_rows) {
        all_rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
        grow_rows = &all_rows;
    }

    Matrix grow_features(grow_rows->size(), data.n_features());
    std::vector<double> grow_y(grow_rows->size());
    for (std::size_t i = 0; i < grow_rows->size(); ++i) {
        const auto src = data.features.row((*grow_rows)[i]);
        std::copy(src.begin(), src.end(), grow_features.row(i).begin());
        grow_y[i] = data.responses[(*grow_rows)[i]];
    }
    TreeGrower grower(grow_features);

    GammaEnsemble model;
    model.shrinkage = cfg.shrinkage;
    model.clamp_lo = cfg.clamp_lo;
    model.clamp_hi = cfg.clamp_hi;
    model.threshold = t;
    model.n_features = data.n_features();
    model.feature_names = data.names;
    model.gamma0 = std::clamp(hill_init(data, t), cfg.clamp_lo, cfg.clamp_hi);
    model.trees.reserve(cfg.n_trees);

    std::vector<double> cur(grow_rows->size(), model.gamma0);
    std::vector<double> grad(grow_rows->size());
    std::vector<double> hess(grow_rows->size());

    for (std::size_t m = 1; m <= cfg.n_trees; ++m) {
        for (std::size_t i = 0; i < grow_rows->size(); ++i) {
            grad[i] = neg_gradient(grow_y[i], cur[i], t.u);
            hess[i] = hessian_term(grow_y[i], cur[i], t.u);
            if (!std::isfinite(grad[i]) || !std::isfinite(hess[i])) {
                throw NumericError("boost: non-finite gradient at iteration " + std::to_string(m));
            }
        }
        RegressionTree tree = grower.grow(grad, cfg.n_leaves, cfg.min_leaf);
        tree = newton_leaf_values(std::move(tree), grow_features, grad, hess);
        for (std::size_t i = 0; i < grow_rows->size(); ++i) {
            cur[i] = std::clamp(cur[i] + cfg.shrinkage * tree.predict(grow_features.row(i)),
                                cfg.clamp_lo, cfg.clamp_hi);
            if (!std::isfinite(cur[i])) {
                throw NumericError("boost: non-finite prediction at iteration " + std::to_string(m));
            }
        }
        model.trees.push_back(std::move(tree));
        if (observer) observer(m, model.trees.back());
    }
    return model;
}

std::vector<double> loss_path(const GammaEnsemble& model, const Dataset& data) {
    const ThresholdSpec& t = model.threshold;
    std::vector<double> path(model.trees.size() + 1, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double y = data.responses[i];
        if (!(y > t.u)) continue;
        const auto x = data.features.row(i);
        double acc = model.gamma0;
        path[0] += psi(y, acc, t.u);
        for (std::size_t m = 0; m < model.trees.size(); ++m) {
            acc = std::clamp(acc + model.shrinkage * model.trees[m].predict(x),
                             model.clamp_lo, model.clamp_hi);
            path[m + 1] += psi(y, acc, t.u);
        }
    }
    return path;
}

namespace {

std::string hex(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
}

double parse_hex(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw InputError("model file: bad float '" + s + "'");
    }
    return v;
}

constexpr const char* kMagic = "tailboost-model";
constexpr int kVersion = 1;

}  // namespace

void save_model(const GammaEnsemble& model, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n';
    out << "gamma0 " << hex(model.gamma0) << '\n';
    out << "nu " << hex(model.shrinkage) << '\n';
    out << "clamp " << hex(model.clamp_lo) << ' ' << hex(model.clamp_hi) << '\n';
    out << "threshold " << hex(model.threshold.u) << ' ' << hex(model.threshold.q) << ' '
        << model.threshold.k << '\n';
    out << "features " << model.n_features << '\n';
    out << "names " << model.feature_names.size() << '\n';
    for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
        out << "name " << i << ' ' << model.feature_names[i] << '\n';
    }
    out << "normalization " << model.norm_min.size() << '\n';
    for (std::size_t i = 0; i < model.norm_min.size(); ++i) {
        out << "norm " << i << ' ' << hex(model.norm_min[i]) << ' ' << hex(model.norm_max[i]) << '\n';
    }
    out << "trees " << model.trees.size() << '\n';
    for (std::size_t m = 0; m < model.trees.size(); ++m) {
        const RegressionTree& tree = model.trees[m];
        out << "tree " << m << " nodes " << tree.nodes().size() << '\n';
        for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
            const TreeNode& node = tree.nodes()[i];
            if (node.is_leaf()) {
                out << "node " << i << " leaf " << hex(node.value) << ' ' << node.count << '\n';
            } else {
                out << "node " << i << " split " << node.feature << ' ' << hex(node.threshold)
                    << ' ' << node.left << ' ' << node.right << ' ' << hex(node.gain) << ' '
                    << node.count << '\n';
            }
        }
    }
    out << "end\n";
}

void save_model(const GammaEnsemble& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open model file for writing: " + path);
    save_model(model, out);
}

namespace {

std::istringstream expect_line(std::istream& in, const std::string& keyword) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("model file: truncated before '" + keyword + "'");
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head != keyword) {
        throw InputError("model file: expected '" + keyword + "', found '" + head + "'");
    }
    return ls;
}

}  // namespace

GammaEnsemble load_model(std::istream& in) {
    {
        std::string magic;
        int version = 0;
        std::string line;
        if (!std::getline(in, line)) throw InputError("model file: empty");
        std::istringstream ls(line);
        ls >> magic >> version;
        if (magic != kMagic) throw InputError("model file: unrecognized header");
        if (version != kVersion) {
            throw InputError("model file: unsupported version " + std::to_string(version));
        }
    }
    GammaEnsemble model;
    std::string tok;
    {
        auto ls = expect_line(in, "gamma0");
        ls >> tok;
        model.gamma0 = parse_hex(tok);
    }
    {
        auto ls = expect_line(in, "nu");
        ls >> tok;
        model.shrinkage = parse_hex(tok);
    }
    {
        auto ls = expect_line(in, "clamp");
        std::string lo, hi;
        ls >> lo >> hi;
        model.clamp_lo = parse_hex(lo);
        model.clamp_hi = parse_hex(hi);
    }
    {
        auto ls = expect_line(in, "threshold");
        std::string u, q;
        ls >> u >> q >> model.threshold.k;
        model.threshold.u = parse_hex(u);
        model.threshold.q = parse_hex(q);
    }
    {
        auto ls = expect_line(in, "features");
        ls >> model.n_features;
    }
    {
        auto ls = expect_line(in, "names");
        std::size_t count = 0;
        ls >> count;
        model.feature_names.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto nl = expect_line(in, "name");
            std::size_t idx = 0;
            nl >> idx;
            std::string rest;
            std::getline(nl, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            if (idx >= count) throw InputError("model file: name index out of range");
            model.feature_names[idx] = rest;
        }
    }
    {
        auto ls = expect_line(in, "normalization");
        std::size_t count = 0;
        ls >> count;
        if (count != 0 && count != model.n_features) {
            throw InputError("model file: normalization block has the wrong width");
        }
        model.norm_min.resize(count);
        model.norm_max.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto nl = expect_line(in, "norm");
            std::size_t idx = 0;
            std::string lo, hi;
            nl >> idx >> lo >> hi;
            if (idx >= count) throw InputError("model file: normalization index out of range");
            model.norm_min[idx] = parse_hex(lo);
            model.norm_max[idx] = parse_hex(hi);
            if (!(model.norm_max[idx] > model.norm_min[idx])) {
                throw InputError("model file: degenerate normalization bounds");
            }
        }
    }
    std::size_t n_trees = 0;
    {
        auto ls = expect_line(in, "trees");
        ls >> n_trees;
    }
    model.trees.resize(n_trees);
    for (std::size_t m = 0; m < n_trees; ++m) {
        std::size_t tree_idx = 0, n_nodes = 0;
        {
            auto ls = expect_line(in, "tree");
            ls >> tree_idx >> tok >> n_nodes;
            if (tree_idx != m || tok != "nodes" || n_nodes == 0) {
                throw InputError("model file: malformed tree header");
            }
        }
        RegressionTree& tree = model.trees[m];
        tree.n_features_ = model.n_features;
        tree.nodes_.resize(n_nodes);
        std::size_t leaves = 0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto ls = expect_line(in, "node");
            std::size_t idx = 0;
            std::string kind;
            ls >> idx >> kind;
            if (idx != i) throw InputError("model file: node ids must be sequential");
            TreeNode node;
            if (kind == "leaf") {
                std::string value;
                ls >> value >> node.count;
                node.value = parse_hex(value);
                ++leaves;
            } else if (kind == "split") {
                std::string threshold, gain;
                ls >> node.feature >> threshold >> node.left >> node.right >> gain >> node.count;
                node.threshold = parse_hex(threshold);
                node.gain = parse_hex(gain);
                if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.n_features ||
                    static_cast<std::size_t>(node.left) >= n_nodes ||
                    static_cast<std::size_t>(node.right) >= n_nodes ||
                    // children follow their parent; rules out reference cycles
                    node.left <= static_cast<std::int32_t>(i) ||
                    node.right <= static_cast<std::int32_t>(i)) {
                    throw InputError("model file: split node references out of range");
                }
            } else {
                throw InputError("model file: unknown node kind '" + kind + "'");
            }
            tree.nodes_[i] = node;
        }
        tree.n_leaves_ = leaves;
    }
    expect_line(in, "end");
    return model;
}

GammaEnsemble load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace tailboost
