#include "tailboost/loss.hpp"

namespace tailboost {

double hill_init(std::span<const double> responses, const ThresholdSpec& t) {
    if (!(t.u > 0.0)) throw std::domain_error("loss: threshold u must be positive");
    double sum = 0.0;
    std::size_t k = 0;
    for (double y : responses) {
        if (y > t.u) {
            sum += std::log(y / t.u);
            ++k;
        }
    }
    if (k == 0) throw InfeasibleError("empty tail sample");
    return sum / static_cast<double>(k);
}

double hill_init(const Dataset& data, const ThresholdSpec& t) {
    return hill_init(std::span<const double>(data.responses), t);
}

double total_loss(const Dataset& data, const GammaFn& gamma_of_x, const ThresholdSpec& t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double y = data.responses[i];
        if (y > t.u) {
            sum += psi(y, gamma_of_x(data.features.row(i)), t.u);
        }
    }
    return sum;
}

}  // namespace tailboost
