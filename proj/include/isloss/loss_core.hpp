#pragma once

// Importance-sampling aggregators over a batch of per-sample losses.
//
// ISloss      F(L)     = T log sum_i exp(L_i / T)
// LogISloss   F_log(L) = T log sum_i L_i^(1/T)      (= log of the (1/T)-norm)
//
// and the weights at the optimum of the entropy-regularized inner maximum,
// which are also the gradients dF/dL_i (ISloss) and L_i dF_log/dL_i (LogISloss).
// Everything is evaluated as a max-shifted log-sum-exp, so finite inputs never
// overflow regardless of T.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "isloss/errors.hpp"

namespace isloss {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using LossVector = VectorX<double>;
using WeightVector = VectorX<double>;

/// Lagrange multiplier of the KL constraint. Always finite and strictly positive.
template <typename Scalar>
class BasicTemperature {
public:
    explicit BasicTemperature(Scalar t) : t_(t) {
        if (!std::isfinite(static_cast<double>(t)) || !(t > Scalar(0)))
            throw DomainError("temperature must be positive and finite");
    }
    Scalar value() const { return t_; }
    Scalar inverse() const { return Scalar(1) / t_; }

private:
    Scalar t_;
};

using Temperature = BasicTemperature<double>;

/// How LogISloss treats non-positive losses.
/// Strict mode rejects them; clamp mode replaces every L_i < epsilon by epsilon
/// (and the clamped entries get zero gradient).
struct LogDomain {
    bool clamp = false;
    double epsilon = 1e-12;

    static LogDomain strict() { return {}; }
    static LogDomain clamped(double epsilon = 1e-12) {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon))
            throw DomainError("log-domain epsilon must be positive");
        return {true, epsilon};
    }
};

namespace detail {

template <typename Derived>
void require_finite_losses(const Eigen::MatrixBase<Derived>& losses) {
    if (losses.size() == 0) throw DomainError("loss vector is empty");
    if (!losses.allFinite()) throw DomainError("loss vector contains non-finite values");
}

// log L_i / T for LogISloss, honouring the log-domain policy.
template <typename Derived>
VectorX<typename Derived::Scalar> scaled_log_losses(const Eigen::MatrixBase<Derived>& losses,
                                                    BasicTemperature<typename Derived::Scalar> temp,
                                                    const LogDomain& domain) {
    using Scalar = typename Derived::Scalar;
    require_finite_losses(losses);
    VectorX<Scalar> out(losses.size());
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
        Scalar v = losses(i);
        if (domain.clamp) {
            if (v < Scalar(domain.epsilon)) v = Scalar(domain.epsilon);
        } else if (!(v > Scalar(0))) {
            throw DomainError("LogISloss requires strictly positive losses (index " +
                              std::to_string(i) + ")");
        }
        out(i) = std::log(v) * temp.inverse();
    }
    return out;
}

}  // namespace detail

/// log sum_i exp(x_i), shifted by max(x).
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) throw DomainError("log_sum_exp of an empty vector");
    const Scalar shift = x.maxCoeff();
    return shift + std::log((x.array() - shift).exp().sum());
}

/// softmax(x), shifted by max(x).
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) throw DomainError("softmax of an empty vector");
    VectorX<Scalar> e = (x.array() - x.maxCoeff()).exp().matrix();
    return e / e.sum();
}

/// Optimal IS weights w_i = exp(L_i/T) / sum_j exp(L_j/T).
template <typename Derived>
VectorX<typename Derived::Scalar> is_weights(const Eigen::MatrixBase<Derived>& losses,
                                             BasicTemperature<typename Derived::Scalar> temp) {
    detail::require_finite_losses(losses);
    return softmax((losses * temp.inverse()).eval());
}

/// ISloss T log sum_i exp(L_i/T). Keeps the constant T log N offset.
template <typename Derived>
typename Derived::Scalar is_loss(const Eigen::MatrixBase<Derived>& losses,
                                 BasicTemperature<typename Derived::Scalar> temp) {
    detail::require_finite_losses(losses);
    return temp.value() * log_sum_exp((losses * temp.inverse()).eval());
}

/// dF/dL_i of ISloss; identical to is_weights.
template <typename Derived>
VectorX<typename Derived::Scalar> is_loss_grad(const Eigen::MatrixBase<Derived>& losses,
                                               BasicTemperature<typename Derived::Scalar> temp) {
    return is_weights(losses, temp);
}

/// LogISloss weights L_i^(1/T) / sum_j L_j^(1/T), computed as softmax(log L / T).
template <typename Derived>
VectorX<typename Derived::Scalar> log_is_weights(const Eigen::MatrixBase<Derived>& losses,
                                                 BasicTemperature<typename Derived::Scalar> temp,
                                                 const LogDomain& domain = LogDomain::strict()) {
    return softmax(detail::scaled_log_losses(losses, temp, domain));
}

/// LogISloss T log sum_i L_i^(1/T).
template <typename Derived>
typename Derived::Scalar log_is_loss(const Eigen::MatrixBase<Derived>& losses,
                                     BasicTemperature<typename Derived::Scalar> temp,
                                     const LogDomain& domain = LogDomain::strict()) {
    return temp.value() * log_sum_exp(detail::scaled_log_losses(losses, temp, domain));
}

/// dF_log/dL_i = w_i / L_i. Entries clamped up to epsilon have zero gradient.
template <typename Derived>
VectorX<typename Derived::Scalar> log_is_loss_grad(const Eigen::MatrixBase<Derived>& losses,
                                                   BasicTemperature<typename Derived::Scalar> temp,
                                                   const LogDomain& domain = LogDomain::strict()) {
    using Scalar = typename Derived::Scalar;
    VectorX<Scalar> grad = log_is_weights(losses, temp, domain);
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        const Scalar v = losses(i);
        if (domain.clamp && v < Scalar(domain.epsilon))
            grad(i) = Scalar(0);
        else
            grad(i) /= v;
    }
    return grad;
}

/// Throws unless `weights` is a point of the probability simplex (sum within 1e-12).
template <typename Derived>
void require_simplex(const Eigen::MatrixBase<Derived>& weights, double tolerance = 1e-12) {
    using Scalar = typename Derived::Scalar;
    if (weights.size() == 0) throw DomainError("weight vector is empty");
    if (!weights.allFinite()) throw DomainError("weight vector contains non-finite values");
    if ((weights.array() < Scalar(0)).any() || (weights.array() > Scalar(1)).any())
        throw DomainError("weights must lie in [0, 1]");
    if (std::abs(static_cast<double>(weights.sum()) - 1.0) > tolerance)
        throw DomainError("weights must sum to 1");
}

/// KL(w || uniform) = sum_i w_i log w_i + log N, with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar empirical_kl(const Eigen::MatrixBase<Derived>& weights) {
    using Scalar = typename Derived::Scalar;
    require_simplex(weights);
    // sum w log(N w): exact zero at uniform, no cancellation against log N.
    const Scalar n = Scalar(weights.size());
    Scalar kl = Scalar(0);
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (weights(i) > Scalar(0)) kl += weights(i) * std::log(n * weights(i));
    return kl > Scalar(0) ? kl : Scalar(0);
}

}  // namespace isloss
