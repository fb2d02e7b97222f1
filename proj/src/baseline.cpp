#include "tailboost/baseline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "tailboost/loss.hpp"

namespace tailboost {

GammaFn TirModel::as_fn() const {
    TirModel copy = *this;
    return [copy](std::span<const double> x) { return predict_tir(copy, x); };
}

double predict_tir(const TirModel& model, std::span<const double> x) {
    if (x.size() + 1 != model.theta.size()) {
        throw std::invalid_argument("predict_tir: feature vector has wrong dimension");
    }
    double s = model.theta[0];
    for (std::size_t j = 0; j < x.size(); ++j) s += model.theta[j + 1] * x[j];
    return std::exp(s);
}

double hill(const Dataset& data, const ThresholdSpec& t) {
    return hill_init(data, t);
}

namespace {

// Deviance of the exceedances in terms of s_i = theta' z_i (z = [1, x]):
// sum_i w_i exp(-s_i) + s_i with w_i = log(y_i / u) > 0. Convex in theta.
struct TirProblem {
    Eigen::MatrixXd z;  // k x (p+1)
    Eigen::VectorXd w;  // k

    double loss(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd s = z * theta;
        return (w.array() * (-s).array().exp() + s.array()).sum();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd s = z * theta;
        const Eigen::VectorXd coef = 1.0 - (w.array() * (-s).array().exp());
        return z.transpose() * coef;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd s = z * theta;
        const Eigen::VectorXd coef = w.array() * (-s).array().exp();
        return z.transpose() * coef.asDiagonal() * z;
    }
};

}  // namespace

TirModel fit_tir(const Dataset& data, const ThresholdSpec& t, const TirOptions& opts) {
    data.validate();
    const std::size_t p = data.n_features();
    if (t.k < p + 1) {
        throw InfeasibleError("tir: need at least p+1 exceedances");
    }

    TirProblem problem;
    {
        std::vector<std::size_t> exceed;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.responses[i] > t.u) exceed.push_back(i);
        }
        if (exceed.empty()) throw InfeasibleError("empty tail sample");
        problem.z.resize(static_cast<Eigen::Index>(exceed.size()), static_cast<Eigen::Index>(p + 1));
        problem.w.resize(static_cast<Eigen::Index>(exceed.size()));
        for (std::size_t r = 0; r < exceed.size(); ++r) {
            problem.z(static_cast<Eigen::Index>(r), 0) = 1.0;
            const auto x = data.features.row(exceed[r]);
            for (std::size_t j = 0; j < p; ++j) {
                problem.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = x[j];
            }
            problem.w(static_cast<Eigen::Index>(r)) = std::log(data.responses[exceed[r]] / t.u);
        }
    }

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
    theta(0) = std::log(hill_init(data, t));

    double loss = problem.loss(theta);
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        const Eigen::VectorXd grad = problem.gradient(theta);
        const double grad_norm = grad.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(grad_norm)) throw NumericError("tir: non-finite gradient");
        if (grad_norm < opts.tol) {
            TirModel model;
            model.theta.assign(theta.data(), theta.data() + theta.size());
            model.threshold = t;
            return model;
        }

        Eigen::VectorXd direction;
        bool newton_direction = false;
        {
            const Eigen::MatrixXd hess = problem.hessian(theta);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            if (ldlt.info() == Eigen::Success) {
                direction = ldlt.solve(-grad);
                newton_direction = direction.allFinite() && grad.dot(direction) < 0.0;
            }
            if (!newton_direction) direction = -grad;  // singular system: plain descent
        }

        // Step halving until the deviance decreases. Near the optimum the
        // per-step improvement drops below the floating-point resolution of
        // the summed loss while the gradient is still above tol, so accept
        // steps within that resolution and let Newton polish the gradient.
        const double slack = 1e-12 * (1.0 + std::abs(loss));
        auto halve_until_descent = [&](const Eigen::VectorXd& dir) {
            double step = 1.0;
            for (int h = 0; h < 60; ++h) {
                const Eigen::VectorXd candidate = theta + step * dir;
                const double candidate_loss = problem.loss(candidate);
                if (std::isfinite(candidate_loss) && candidate_loss <= loss + slack) {
                    theta = candidate;
                    loss = candidate_loss;
                    return true;
                }
                step *= 0.5;
            }
            return false;
        };
        bool moved = halve_until_descent(direction);
        if (!moved && newton_direction) {
            moved = halve_until_descent(-grad);  // retry along the raw gradient
        }
        if (!moved) {
            throw NumericError("tir: line search stalled at gradient norm " +
                               std::to_string(grad_norm));
        }
    }

    const double grad_norm = problem.gradient(theta).lpNorm<Eigen::Infinity>();
    if (grad_norm < opts.tol) {
        TirModel model;
        model.theta.assign(theta.data(), theta.data() + theta.size());
        model.threshold = t;
        return model;
    }
    std::string msg = "tir: no convergence after " + std::to_string(opts.max_iter) +
                      " iterations; gradient norm " + std::to_string(grad_norm) + "; theta =";
    for (Eigen::Index j = 0; j < theta.size(); ++j) msg += " " + std::to_string(theta(j));
    throw NumericError(msg);
}

ThresholdFitter make_tir_fitter(const TirOptions& opts) {
    return [opts](const Dataset& data, const ThresholdSpec& t) -> ThresholdFit {
        auto model = std::make_shared<TirModel>(fit_tir(data, t, opts));
        ThresholdFit out;
        out.gamma = [model](std::span<const double> x) { return predict_tir(*model, x); };
        return out;
    };
}

}  // namespace tailboost
