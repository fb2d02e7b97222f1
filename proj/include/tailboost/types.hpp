#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailboost {

// Bad or unparsable user input (files, cell contents, flag values).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input that the requested computation cannot use
// (empty tail sample, grid with no feasible point, too few folds, ...).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at runtime (non-finite intermediate, non-convergence).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Observations (x_i, y_i): an n x p feature matrix, a positive-tail response
/// vector, and optional feature labels.
struct Dataset {
    Matrix features;
    std::vector<double> responses;
    std::vector<std::string> names;  // empty, or one label per column

    std::size_t size() const { return responses.size(); }
    std::size_t n_features() const { return features.cols(); }

    // Enforces n >= 1, p >= 1, aligned row counts and finite entries.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;
};

/// Exceedance threshold: value u, tail fraction q and exceedance count k.
struct ThresholdSpec {
    double u = 0.0;
    double q = 0.0;
    std::size_t k = 0;

    // u is the ceil((1-q)*n)-th order statistic of the responses,
    // k the number of strict exceedances y > u.
    static ThresholdSpec from_fraction(std::span<const double> responses, double q);
    static ThresholdSpec from_value(std::span<const double> responses, double u);
};

/// The ceil((1-q)*n)-th order statistic (1-indexed), q in (0,1).
double empirical_upper_quantile(std::span<const double> values, double q);

/// Min-max normalization of every column to [0,1], endpoints attained.
/// Throws InputError naming the first constant column (using `names` when
/// given). When mins/maxs are non-null they receive the per-column bounds.
Matrix minmax_normalize(const Matrix& x, const std::vector<std::string>& names = {},
                        std::vector<double>* mins = nullptr, std::vector<double>* maxs = nullptr);

/// A fitted tail-index surface gamma(x) > 0.
using GammaFn = std::function<double(std::span<const double>)>;

}  // namespace tailboost
