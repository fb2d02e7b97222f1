#include "tailboost/types.hpp"

#include <algorithm>
#include <cmath>

namespace tailboost {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) {
            throw InputError("matrix rows have inconsistent lengths");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

void Dataset::validate() const {
    if (responses.empty()) throw InputError("dataset: no observations");
    if (features.cols() == 0) throw InputError("dataset: no features");
    if (features.rows() != responses.size()) {
        throw InputError("dataset: feature rows and response length differ");
    }
    if (!names.empty() && names.size() != features.cols()) {
        throw InputError("dataset: feature label count differs from column count");
    }
    for (double v : features.data()) {
        if (!std::isfinite(v)) throw InputError("dataset: non-finite feature entry");
    }
    for (double v : responses) {
        if (!std::isfinite(v)) throw InputError("dataset: non-finite response entry");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = Matrix(rows.size(), features.cols());
    out.responses.resize(rows.size());
    out.names = names;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.responses[i] = responses[rows[i]];
    }
    return out;
}

Matrix minmax_normalize(const Matrix& x, const std::vector<std::string>& names,
                        std::vector<double>* mins, std::vector<double>* maxs) {
    if (x.rows() == 0 || x.cols() == 0) throw InputError("normalize: empty matrix");
    Matrix out(x.rows(), x.cols());
    if (mins) mins->assign(x.cols(), 0.0);
    if (maxs) maxs->assign(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double lo = x(0, j), hi = x(0, j);
        for (std::size_t i = 1; i < x.rows(); ++i) {
            lo = std::min(lo, x(i, j));
            hi = std::max(hi, x(i, j));
        }
        if (!(hi > lo)) {
            const std::string label = j < names.size() ? names[j] : std::to_string(j);
            throw InputError("cannot normalize constant column '" + label + "'");
        }
        for (std::size_t i = 0; i < x.rows(); ++i) {
            out(i, j) = (x(i, j) - lo) / (hi - lo);
        }
        if (mins) (*mins)[j] = lo;
        if (maxs) (*maxs)[j] = hi;
    }
    return out;
}

double empirical_upper_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw InfeasibleError("quantile of empty sample");
    if (!(q > 0.0 && q < 1.0)) throw InfeasibleError("tail fraction must lie in (0,1)");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - q) * n));  // 1-indexed
    rank = std::min(std::max<std::size_t>(rank, 1), sorted.size());
    return sorted[rank - 1];
}

ThresholdSpec ThresholdSpec::from_fraction(std::span<const double> responses, double q) {
    ThresholdSpec t;
    t.q = q;
    t.u = empirical_upper_quantile(responses, q);
    if (!(t.u > 0.0)) {
        throw InfeasibleError("threshold quantile is not positive; responses must have a positive tail");
    }
    t.k = static_cast<std::size_t>(
        std::count_if(responses.begin(), responses.end(), [&](double y) { return y > t.u; }));
    return t;
}

ThresholdSpec ThresholdSpec::from_value(std::span<const double> responses, double u) {
    if (!(u > 0.0)) throw InfeasibleError("threshold must be positive");
    if (responses.empty()) throw InfeasibleError("threshold over empty sample");
    ThresholdSpec t;
    t.u = u;
    t.k = static_cast<std::size_t>(
        std::count_if(responses.begin(), responses.end(), [&](double y) { return y > u; }));
    t.q = static_cast<double>(t.k) / static_cast<double>(responses.size());
    return t;
}

}  // namespace tailboost
