#include "tailboost/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tailboost/loss.hpp"
#include "tailboost/parallel.hpp"

namespace tailboost {

DgpVariant dgp_variant_from_string(const std::string& s) {
    if (s == "corrected") return DgpVariant::corrected;
    if (s == "as-printed" || s == "as_printed") return DgpVariant::as_printed;
    throw InputError("unknown dgp variant '" + s + "' (want corrected|as-printed)");
}

namespace {

std::size_t min_covariates(int scenario) {
    switch (scenario) {
        case 2: return 1;
        case 5: return 4;
        default: return 3;
    }
}

}  // namespace

void SimConfig::validate() const {
    if (scenario < 1 || scenario > 5) throw InfeasibleError("sim: scenario must be 1..5");
    if (n_train == 0 || n_test == 0) throw InfeasibleError("sim: sample sizes must be positive");
    if (n_features < min_covariates(scenario)) {
        throw InfeasibleError("sim: case " + std::to_string(scenario) + " needs at least " +
                              std::to_string(min_covariates(scenario)) + " covariates");
    }
    if (!(m >= 0.0)) throw InfeasibleError("sim: second-order parameter must be >= 0");
    if (!(C > 0.0)) throw InfeasibleError("sim: scale C must be positive");
    if (q_list.empty() && !optimal_q) throw InfeasibleError("sim: no tail fraction requested");
    for (double q : q_list) {
        if (!(q > 0.0 && q < 1.0)) throw InfeasibleError("sim: tail fractions must lie in (0,1)");
    }
    if (replications == 0) throw InfeasibleError("sim: need at least one replication");
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

Matrix gen_covariates(std::size_t n, std::size_t p, Rng& rng) {
    // Latent AR(1) chain has exactly Cov(Z_j, Z_k) = (1/2)^|j-k|.
    constexpr double rho = 0.5;
    const double innovation = std::sqrt(1.0 - rho * rho);
    const double scale = 2.0 * std::sqrt(3.0);

    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        double z = rng.normal();
        x(i, 0) = scale * (normal_cdf(z) - 0.5);
        for (std::size_t j = 1; j < p; ++j) {
            z = rho * z + innovation * rng.normal();
            x(i, j) = scale * (normal_cdf(z) - 0.5);
        }
    }
    return x;
}

Matrix gen_covariates(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    return gen_covariates(n, p, rng);
}

double gamma_case(int scenario, std::span<const double> x, double C) {
    const std::size_t p = x.size();
    if (scenario >= 1 && scenario <= 5 && p < min_covariates(scenario)) {
        throw std::invalid_argument("gamma_case: too few covariates for this case");
    }
    switch (scenario) {
        case 1:
            return C * std::exp(-0.5 * x[0] + x[1] / 3.0 - x[2] / 3.0);
        case 2: {
            double s = 0.0;
            // feature j (0-based) carries sign (-1)^(j+1)
            for (std::size_t j = 0; j < p; ++j) s += (j % 2 == 0 ? -x[j] : x[j]);
            return C * std::exp(2.0 * s / static_cast<double>(p));
        }
        case 3:
            return C * std::exp(-0.5 * x[0] * x[0] + x[1] * x[1] / 3.0 - x[2] * x[2] / 3.0);
        case 4: {
            const double a = x[0] + x[1];
            const double b = x[1] + x[2];
            return std::exp(-a * a - b * b * b * b);
        }
        case 5: {
            // The printed radicands go negative on half the covariate space;
            // they are read as absolute differences, floored at 1e-6 against
            // the division by zero on the x3 == x4 band. exp can still
            // underflow near that band, so keep the result positive.
            const double a = std::max(std::abs(x[0] - x[1]), 1e-6);
            const double b = std::max(std::abs(x[2] - x[3]), 1e-6);
            const double value = std::exp(-std::sqrt(a) - 1.0 / std::sqrt(b));
            return std::max(value, std::numeric_limits<double>::min());
        }
        default:
            throw InfeasibleError("gamma_case: scenario must be 1..5");
    }
}

double sample_response(double gamma, double m, double u01, DgpVariant variant) {
    if (!(gamma > 0.0)) throw std::domain_error("sample_response: gamma must be positive");
    if (!(u01 > 0.0 && u01 < 1.0)) throw std::domain_error("sample_response: u01 must lie in (0,1)");
    const double base = (1.0 + m) / u01 - m;
    if (variant == DgpVariant::corrected) {
        return std::pow(base, gamma);
    }
    if (!(gamma < 1.0)) {
        throw std::domain_error("sample_response: the as-printed law is only proper for gamma < 1");
    }
    return std::pow(base, gamma / (1.0 - gamma));
}

double optimal_fraction(const Dataset& train, const ThresholdFitter& fitter,
                        std::span<const double> q_grid, std::size_t k_min) {
    return scan_thresholds(train, fitter, q_grid, Measure::sum, k_min, 1).best_q;
}

double mean_squared_error(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size() || truth.empty()) {
        throw std::invalid_argument("mean_squared_error: length mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double diff = estimate[i] - truth[i];
        sum += diff * diff;
    }
    return sum / static_cast<double>(truth.size());
}

namespace {

struct Sample {
    Matrix x;
    std::vector<double> y;
    std::vector<double> gamma_true;
};

Sample draw_sample(const SimConfig& cfg, std::size_t n, Rng& rng) {
    Sample s;
    s.x = gen_covariates(n, cfg.n_features, rng);
    s.y.resize(n);
    s.gamma_true.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.gamma_true[i] = gamma_case(cfg.scenario, s.x.row(i), cfg.C);
        s.y[i] = sample_response(s.gamma_true[i], cfg.m, rng.uniform01(), cfg.variant);
    }
    return s;
}

double median_ignoring_missing(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ExperimentReport run_experiment(const SimConfig& cfg, std::size_t n_threads) {
    cfg.validate();

    std::vector<std::string> q_labels;
    for (double q : cfg.q_list) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", q);
        q_labels.emplace_back(buf);
    }
    if (cfg.optimal_q) q_labels.emplace_back("qstar");
    const std::size_t n_q = q_labels.size();
    const std::size_t R = cfg.replications;

    struct Cell {
        double delta_boost = std::numeric_limits<double>::quiet_NaN();
        double delta_tir = std::numeric_limits<double>::quiet_NaN();
        double q_used = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<Cell> cells(n_q * R);

    parallel_for(R, n_threads, [&](std::size_t r) {
        Rng rng(derive_seed(cfg.seed, r));
        const Sample train = draw_sample(cfg, cfg.n_train, rng);
        const Sample test = draw_sample(cfg, cfg.n_test, rng);

        Dataset train_data;
        train_data.features = train.x;
        train_data.responses = train.y;

        for (std::size_t qi = 0; qi < n_q; ++qi) {
            Cell& cell = cells[qi * R + r];
            double q;
            if (qi < cfg.q_list.size()) {
                q = cfg.q_list[qi];
            } else {
                // q* per replicate: scan of the summed discrepancies with the
                // parametric baseline as the (fast) pilot fitter
                try {
                    q = optimal_fraction(train_data, make_tir_fitter(cfg.tir), default_q_grid());
                } catch (const std::exception&) {
                    continue;
                }
            }
            cell.q_used = q;

            ThresholdSpec t;
            try {
                t = ThresholdSpec::from_fraction(train_data.responses, q);
            } catch (const std::exception&) {
                continue;
            }

            try {
                TuneGrid grid = cfg.tune;
                grid.seed = derive_seed(cfg.seed, 0x7e5e + r);
                BoostConfig best = cfg.base;
                const TuneResult tuned = cv_tune(train_data, t, grid, cfg.base, 1);
                best.n_trees = tuned.best_M;
                best.shrinkage = tuned.best_nu;
                best.n_leaves = tuned.best_L;
                best.seed = grid.seed;
                const GammaEnsemble model = fit(train_data, t, best);
                std::vector<double> estimate(cfg.n_test);
                for (std::size_t i = 0; i < cfg.n_test; ++i) {
                    estimate[i] = model.predict(test.x.row(i));
                }
                cell.delta_boost = mean_squared_error(estimate, test.gamma_true);
            } catch (const std::exception&) {
                // infeasible threshold or failed fit: recorded as missing
            }
            try {
                const TirModel tir = fit_tir(train_data, t, cfg.tir);
                std::vector<double> estimate(cfg.n_test);
                for (std::size_t i = 0; i < cfg.n_test; ++i) {
                    estimate[i] = predict_tir(tir, test.x.row(i));
                }
                cell.delta_tir = mean_squared_error(estimate, test.gamma_true);
            } catch (const NumericError&) {
                // non-convergence of the baseline: recorded as missing
            }
        }
    });

    ExperimentReport report;
    report.config = cfg;
    for (std::size_t qi = 0; qi < n_q; ++qi) {
        QResult qr;
        qr.q_label = q_labels[qi];
        std::vector<double> q_used;
        for (std::size_t r = 0; r < R; ++r) {
            const Cell& cell = cells[qi * R + r];
            qr.boost.deltas.push_back(cell.delta_boost);
            qr.tir.deltas.push_back(cell.delta_tir);
            if (!std::isnan(cell.q_used)) q_used.push_back(cell.q_used);
        }
        qr.q = median_ignoring_missing(q_used);
        qr.boost.median = median_ignoring_missing(qr.boost.deltas);
        qr.tir.median = median_ignoring_missing(qr.tir.deltas);
        qr.boost.n_missing = static_cast<std::size_t>(
            std::count_if(qr.boost.deltas.begin(), qr.boost.deltas.end(),
                          [](double v) { return std::isnan(v); }));
        qr.tir.n_missing = static_cast<std::size_t>(
            std::count_if(qr.tir.deltas.begin(), qr.tir.deltas.end(),
                          [](double v) { return std::isnan(v); }));
        qr.efficiency = qr.tir.median / qr.boost.median;
        report.results.push_back(std::move(qr));
    }
    return report;
}

}  // namespace tailboost
