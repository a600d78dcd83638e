#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace isloss {

/// Central-difference gradient of f at x. The step for coordinate i is
/// h * max(1, |x_i|).
template <typename Function>
Eigen::VectorXd central_difference(Function&& f, const Eigen::VectorXd& x, double h = 1e-6) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x(i)));
        probe(i) = x(i) + step;
        const double up = f(probe);
        probe(i) = x(i) - step;
        const double down = f(probe);
        probe(i) = x(i);
        grad(i) = (up - down) / (2.0 * step);
    }
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-12) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
        worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
    }
    return worst;
}

}  // namespace isloss
