#include "tailboost/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>

#include "tailboost/parallel.hpp"

namespace tailboost {

UniformResiduals u_transform(const Dataset& data, const GammaFn& gamma_of_x,
                             const ThresholdSpec& t) {
    if (!(t.u > 0.0)) throw std::domain_error("u_transform: threshold must be positive");
    UniformResiduals res;
    res.values.reserve(t.k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double y = data.responses[i];
        if (!(y > t.u)) continue;
        const double gamma = gamma_of_x(data.features.row(i));
        if (!(gamma > 0.0)) throw std::domain_error("u_transform: gamma must be positive");
        const double value = std::pow(y / t.u, -1.0 / gamma);
        if (!(value > 0.0 && value < 1.0)) {
            throw NumericError("u_transform: residual left (0,1)");
        }
        res.values.push_back(value);
    }
    if (res.values.empty()) throw InfeasibleError("empty tail sample");
    return res;
}

Discrepancies discrepancies(const UniformResiduals& res) {
    const std::size_t k = res.values.size();
    if (k == 0) throw InfeasibleError("discrepancies of empty residual sample");
    for (double v : res.values) {
        if (v <= 0.0 || v >= 1.0) {
            throw std::domain_error("discrepancies: residuals must lie strictly in (0,1)");
        }
    }
    std::vector<double> sorted(res.values);
    std::sort(sorted.begin(), sorted.end());
    const double kd = static_cast<double>(k);

    // Summing over the sorted sample makes the result independent of the
    // residuals' input order, bit for bit.
    Discrepancies d;
    for (std::size_t i = 0; i < k; ++i) {
        const double v = sorted[i];
        // right-continuous empirical CDF: F_k(v) = #{u_j <= v} / k
        std::size_t rank = i + 1;
        while (rank < k && sorted[rank] == v) ++rank;
        const double gap = v - static_cast<double>(rank) / kd;
        d.d1 += gap * gap;
        d.d2 = std::max(d.d2, std::abs(gap));
        d.d3 += gap * gap / (v * (1.0 - v));
    }
    d.d1 /= kd;
    d.d3 /= kd;
    return d;
}

double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100000; ++j) {
        const double term = std::exp(-2.0 * lambda * lambda * static_cast<double>(j) *
                                     static_cast<double>(j));
        sum += sign * term;
        if (term < 1e-10) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniform_test(const UniformResiduals& res) {
    const std::size_t k = res.values.size();
    if (k == 0) throw InfeasibleError("KS test on empty residual sample");
    std::vector<double> sorted(res.values);
    std::sort(sorted.begin(), sorted.end());
    const double kd = static_cast<double>(k);
    double stat = 0.0;
    for (std::size_t i = 1; i <= k; ++i) {
        const double v = sorted[i - 1];
        stat = std::max(stat, static_cast<double>(i) / kd - v);
        stat = std::max(stat, v - static_cast<double>(i - 1) / kd);
    }
    KsResult out;
    out.statistic = stat;
    out.p_value = kolmogorov_survival(std::sqrt(kd) * stat);
    return out;
}

Measure measure_from_string(const std::string& s) {
    if (s == "d1") return Measure::d1;
    if (s == "d2") return Measure::d2;
    if (s == "d3") return Measure::d3;
    if (s == "sum") return Measure::sum;
    throw InputError("unknown discrepancy measure '" + s + "' (want d1|d2|d3|sum)");
}

namespace {

double measure_value(const DiscrepancyReport& r, Measure m) {
    switch (m) {
        case Measure::d1: return r.d1;
        case Measure::d2: return r.d2;
        case Measure::d3: return r.d3;
        case Measure::sum: return r.d1 + r.d2 + r.d3;
    }
    return r.d1;
}

}  // namespace

ScanResult scan_thresholds(const Dataset& data, const ThresholdFitter& fitter,
                           std::span<const double> q_grid, Measure measure,
                           std::size_t k_min, std::size_t n_threads) {
    if (q_grid.empty()) throw InfeasibleError("scan: empty tail fraction grid");
    std::vector<double> grid(q_grid.begin(), q_grid.end());
    std::sort(grid.begin(), grid.end());

    struct Slot {
        bool ok = false;
        DiscrepancyReport report;
        std::string warning;
    };
    std::vector<Slot> slots(grid.size());

    parallel_for(grid.size(), n_threads, [&](std::size_t gi) {
        Slot& slot = slots[gi];
        const double q = grid[gi];
        try {
            const ThresholdSpec t = ThresholdSpec::from_fraction(data.responses, q);
            if (t.k < k_min) {
                slot.warning = "scan: skipping q=" + std::to_string(q) + " (" +
                               std::to_string(t.k) + " exceedances < " + std::to_string(k_min) + ")";
                return;
            }
            ThresholdFit fit = fitter(data, t);
            const UniformResiduals res = u_transform(data, fit.gamma, t);
            const Discrepancies d = discrepancies(res);
            slot.report = {q, t.u, t.k, d.d1, d.d2, d.d3,
                           fit.selected_M, fit.selected_nu, fit.selected_L};
            slot.ok = true;
        } catch (const std::exception& e) {
            slot.warning = "scan: skipping q=" + std::to_string(q) + " (" + e.what() + ")";
        }
    });

    ScanResult out;
    for (const Slot& slot : slots) {
        if (!slot.warning.empty()) std::cerr << slot.warning << '\n';
        if (slot.ok) out.reports.push_back(slot.report);
    }
    if (out.reports.empty()) throw InfeasibleError("scan: no feasible tail fraction in the grid");

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.reports.size(); ++i) {
        // strict improvement only: reports are ascending in q, so ties keep
        // the smallest q
        if (measure_value(out.reports[i], measure) < measure_value(out.reports[best], measure)) {
            best = i;
        }
    }
    out.best_index = best;
    out.best_q = out.reports[best].q;
    out.best_u = out.reports[best].u;
    return out;
}

std::vector<double> default_q_grid() {
    std::vector<double> grid;
    grid.reserve(199);
    for (int i = 1; i <= 199; ++i) grid.push_back(static_cast<double>(i) * 0.005);
    return grid;
}

}  // namespace tailboost
