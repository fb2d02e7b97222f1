#include "tailboost/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>

#include "tailboost/loss.hpp"
#include "tailboost/parallel.hpp"
#include "tailboost/rng.hpp"

namespace tailboost {

void TuneGrid::validate() const {
    if (nu_values.empty() || L_values.empty()) {
        throw InfeasibleError("tune: empty parameter grid");
    }
    for (double nu : nu_values) {
        if (!(nu > 0.0 && nu <= 1.0)) throw InfeasibleError("tune: shrinkage values must lie in (0,1]");
    }
    for (std::size_t L : L_values) {
        if (L < 2) throw InfeasibleError("tune: leaf counts must be >= 2");
    }
    if (folds < 2) throw InfeasibleError("tune: need at least 2 folds");
}

namespace {

// Seeded shuffle stratified on the exceedance indicator, dealt round-robin,
// so per-fold exceedance counts differ by at most one.
std::vector<std::size_t> assign_folds(const Dataset& data, const ThresholdSpec& t,
                                      std::size_t K, std::uint64_t seed) {
    std::vector<std::size_t> exceed, rest;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data.responses[i] > t.u ? exceed : rest).push_back(i);
    }
    Rng rng(derive_seed(seed, 0xf01d5u));
    rng.shuffle(exceed);
    rng.shuffle(rest);
    std::vector<std::size_t> fold_of_row(data.size(), 0);
    for (std::size_t j = 0; j < exceed.size(); ++j) fold_of_row[exceed[j]] = j % K;
    for (std::size_t j = 0; j < rest.size(); ++j) fold_of_row[rest[j]] = j % K;
    return fold_of_row;
}

}  // namespace

TuneResult cv_tune(const Dataset& data, const ThresholdSpec& t, const TuneGrid& grid,
                   const BoostConfig& base, std::size_t n_threads) {
    data.validate();
    grid.validate();
    if (t.k < grid.folds) {
        throw InfeasibleError("tune: fewer exceedances than folds");
    }

    const std::size_t K = grid.folds;
    const std::vector<std::size_t> fold_of_row = assign_folds(data, t, K, grid.seed);

    // Per-fold training subsets and validation exceedances, shared by all cells.
    struct FoldData {
        Dataset train;
        ThresholdSpec t_train;
        std::vector<double> val_y;        // validation exceedances
        std::vector<std::size_t> val_rows;
    };
    std::vector<FoldData> folds(K);
    for (std::size_t j = 0; j < K; ++j) {
        std::vector<std::size_t> train_rows;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (fold_of_row[i] == j) {
                if (data.responses[i] > t.u) {
                    folds[j].val_rows.push_back(i);
                    folds[j].val_y.push_back(data.responses[i]);
                }
            } else {
                train_rows.push_back(i);
            }
        }
        if (folds[j].val_rows.empty()) {
            throw InfeasibleError("tune: a fold received no validation exceedances");
        }
        folds[j].train = data.subset(train_rows);
        folds[j].t_train.u = t.u;
        folds[j].t_train.q = t.q;
        folds[j].t_train.k = static_cast<std::size_t>(std::count_if(
            folds[j].train.responses.begin(), folds[j].train.responses.end(),
            [&](double y) { return y > t.u; }));
        if (folds[j].t_train.k == 0) {
            throw InfeasibleError("tune: a fold received no training exceedances");
        }
    }

    TuneResult result;
    result.fold_of_row = fold_of_row;
    const std::size_t n_cells = grid.nu_values.size() * grid.L_values.size();
    result.cells.resize(n_cells);

    parallel_for(n_cells, n_threads, [&](std::size_t cell_idx) {
        const double nu = grid.nu_values[cell_idx / grid.L_values.size()];
        const std::size_t L = grid.L_values[cell_idx % grid.L_values.size()];

        CvCell cell;
        cell.nu = nu;
        cell.L = L;
        cell.curve.assign(grid.M_max + 1, 0.0);

        for (std::size_t j = 0; j < K; ++j) {
            const FoldData& fold = folds[j];
            BoostConfig cfg = base;
            cfg.n_trees = grid.M_max;
            cfg.shrinkage = nu;
            cfg.n_leaves = L;
            cfg.seed = grid.seed;

            // Stream the validation-loss curve while the fold model fits:
            // one clamped additive update per appended tree.
            const double gamma0 = std::clamp(hill_init(fold.train.responses, fold.t_train),
                                             cfg.clamp_lo, cfg.clamp_hi);
            std::vector<double> val_gamma(fold.val_rows.size(), gamma0);
            double loss0 = 0.0;
            for (std::size_t v = 0; v < fold.val_rows.size(); ++v) {
                loss0 += psi(fold.val_y[v], val_gamma[v], t.u);
            }
            cell.curve[0] += loss0;

            auto observer = [&](std::size_t m, const RegressionTree& tree) {
                double loss_m = 0.0;
                for (std::size_t v = 0; v < fold.val_rows.size(); ++v) {
                    val_gamma[v] = std::clamp(
                        val_gamma[v] + nu * tree.predict(data.features.row(fold.val_rows[v])),
                        cfg.clamp_lo, cfg.clamp_hi);
                    loss_m += psi(fold.val_y[v], val_gamma[v], t.u);
                }
                cell.curve[m] += loss_m;
            };
            fit(fold.train, fold.t_train, cfg, observer);
        }

        cell.best_m = 0;
        for (std::size_t m = 1; m <= grid.M_max; ++m) {
            if (cell.curve[m] < cell.curve[cell.best_m]) cell.best_m = m;
        }
        result.cells[cell_idx] = std::move(cell);
    });

    // Smallest loss wins; ties prefer smaller L, then smaller nu, then smaller M.
    bool have = false;
    for (const CvCell& cell : result.cells) {
        const double loss = cell.curve[cell.best_m];
        const bool better =
            !have || loss < result.best_loss ||
            (loss == result.best_loss &&
             (cell.L < result.best_L ||
              (cell.L == result.best_L &&
               (cell.nu < result.best_nu ||
                (cell.nu == result.best_nu && cell.best_m < result.best_M)))));
        if (better) {
            have = true;
            result.best_loss = loss;
            result.best_M = cell.best_m;
            result.best_nu = cell.nu;
            result.best_L = cell.L;
        }
    }
    return result;
}

ThresholdFitter make_cv_fitter(const TuneGrid& grid, const BoostConfig& base,
                               bool freeze_tuning) {
    struct Frozen {
        std::mutex mutex;
        bool have = false;
        std::size_t M = 0;
        double nu = 0.0;
        std::size_t L = 0;
    };
    auto frozen = std::make_shared<Frozen>();
    return [grid, base, freeze_tuning, frozen](const Dataset& data,
                                               const ThresholdSpec& t) -> ThresholdFit {
        BoostConfig cfg = base;
        if (freeze_tuning) {
            std::lock_guard<std::mutex> lock(frozen->mutex);
            if (!frozen->have) {
                const TuneResult tuned = cv_tune(data, t, grid, base);
                frozen->M = tuned.best_M;
                frozen->nu = tuned.best_nu;
                frozen->L = tuned.best_L;
                frozen->have = true;
            }
            cfg.n_trees = frozen->M;
            cfg.shrinkage = frozen->nu;
            cfg.n_leaves = frozen->L;
        } else {
            const TuneResult tuned = cv_tune(data, t, grid, base);
            cfg.n_trees = tuned.best_M;
            cfg.shrinkage = tuned.best_nu;
            cfg.n_leaves = tuned.best_L;
        }
        cfg.seed = grid.seed;
        auto model = std::make_shared<GammaEnsemble>(fit(data, t, cfg));
        ThresholdFit out;
        out.gamma = [model](std::span<const double> x) { return model->predict(x); };
        out.selected_M = cfg.n_trees;
        out.selected_nu = cfg.shrinkage;
        out.selected_L = cfg.n_leaves;
        return out;
    };
}

}  // namespace tailboost
