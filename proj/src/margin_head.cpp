#include "isloss/margin_head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace isloss {

namespace {

void check_inputs(const EmbeddingBatch& batch, const ClassWeights& weights) {
    if (batch.features.rows() == 0) throw DomainError("embedding batch is empty");
    if (static_cast<std::size_t>(batch.features.rows()) != batch.labels.size())
        throw std::invalid_argument("label count does not match feature rows");
    if (batch.features.cols() != weights.dim())
        throw std::invalid_argument("feature dimension does not match class-weight rows");
    if (weights.classes() < 1) throw std::invalid_argument("class weights have no columns");
    for (int y : batch.labels)
        if (y < 0 || y >= weights.classes()) throw std::out_of_range("label out of range");
}

struct TargetLogit {
    double value;
    double derivative;  // d logit / d cos (before clamping)
};

// Angles with theta + m outside [0, pi] are clamped to the boundary so the
// target logit stays monotone in theta.
TargetLogit target_logit(double cosine, bool cos_clamped, const MarginConfig& cfg) {
    const double s = cfg.scale, m = cfg.margin;
    if (cfg.kind == MarginKind::additive_cosine)
        return {s * (cosine - m), cos_clamped ? 0.0 : s};

    const double theta = std::acos(cosine);
    const double lo = std::max(0.0, -m);
    const double hi = std::numbers::pi - m;
    if (theta > hi) return {s * std::cos(hi + m), 0.0};
    if (theta < lo) return {s * std::cos(lo + m), 0.0};
    // d/dc [s cos(acos(c) + m)] = s sin(theta + m) / sin(theta)
    const double derivative = cos_clamped ? 0.0 : s * std::sin(theta + m) / std::sin(theta);
    return {s * std::cos(theta + m), derivative};
}

// Backward of x / max(|x|, floor) for one vector.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& raw, const Eigen::VectorXd& unit,
                                   const Eigen::VectorXd& grad_unit) {
    const double norm = raw.norm();
    if (norm <= kNormFloor) return grad_unit / kNormFloor;
    return (grad_unit - unit * unit.dot(grad_unit)) / norm;
}

struct Forward {
    Eigen::MatrixXd unit_features;  // n x d
    Eigen::MatrixXd unit_weights;   // d x K
    Eigen::MatrixXd logits;         // n x K
    Eigen::MatrixXd dlogit_dcos;    // n x K
    LossVector losses;
};

Forward forward(const EmbeddingBatch& batch, const ClassWeights& weights, const MarginConfig& cfg) {
    check_inputs(batch, weights);
    cfg.validate();
    Forward f;
    f.unit_features = normalize_rows(batch.features);
    f.unit_weights = normalize_columns(weights.matrix);
    const Eigen::MatrixXd raw_cos = f.unit_features * f.unit_weights;

    const Eigen::Index n = raw_cos.rows(), k = raw_cos.cols();
    f.logits.resize(n, k);
    f.dlogit_dcos.resize(n, k);
    f.losses.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = batch.labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < k; ++j) {
            const double c0 = raw_cos(i, j);
            const double c = std::clamp(c0, -1.0 + kCosineClamp, 1.0 - kCosineClamp);
            const bool clamped = c != c0;
            if (j == y) {
                const TargetLogit t = target_logit(c, clamped, cfg);
                f.logits(i, j) = t.value;
                f.dlogit_dcos(i, j) = t.derivative;
            } else {
                f.logits(i, j) = cfg.scale * c;
                f.dlogit_dcos(i, j) = clamped ? 0.0 : cfg.scale;
            }
        }
        f.losses(i) = softmax_cross_entropy(f.logits.row(i).transpose(), y);
    }
    return f;
}

}  // namespace

void MarginConfig::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("margin scale must be positive");
    if (!std::isfinite(margin)) throw std::invalid_argument("margin must be finite");
    if (kind == MarginKind::additive_angular && std::abs(margin) >= std::numbers::pi)
        throw std::invalid_argument("angular margin must lie in (-pi, pi)");
}

std::string to_string(MarginKind k) {
    return k == MarginKind::additive_angular ? "additive-angular" : "additive-cosine";
}

std::string to_string(Aggregate a) { return a == Aggregate::mean_ce ? "mean-ce" : "log-is"; }

MarginKind parse_margin_kind(const std::string& s) {
    if (s == "additive-angular" || s == "arc") return MarginKind::additive_angular;
    if (s == "additive-cosine" || s == "add") return MarginKind::additive_cosine;
    throw std::invalid_argument("unknown margin kind '" + s + "'");
}

Aggregate parse_aggregate(const std::string& s) {
    if (s == "mean-ce") return Aggregate::mean_ce;
    if (s == "log-is") return Aggregate::log_is;
    throw std::invalid_argument("unknown aggregate '" + s + "'");
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) /= std::max(m.row(i).norm(), kNormFloor);
    return out;
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) /= std::max(m.col(j).norm(), kNormFloor);
    return out;
}

Eigen::MatrixXd cosine_matrix(const EmbeddingBatch& batch, const ClassWeights& weights) {
    check_inputs(batch, weights);
    return normalize_rows(batch.features) * normalize_columns(weights.matrix);
}

double softmax_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int target) {
    const double zt = logits(target);
    const double top = logits.maxCoeff();
    if (zt >= top) {
        // log1p keeps precision when the target dominates.
        double rest = 0.0;
        for (Eigen::Index j = 0; j < logits.size(); ++j)
            if (j != target) rest += std::exp(logits(j) - zt);
        return std::log1p(rest);
    }
    return top - zt + std::log((logits.array() - top).exp().sum());
}

LossVector arc_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                               const MarginConfig& cfg) {
    if (cfg.kind != MarginKind::additive_angular)
        throw std::invalid_argument("arc loss requires an additive-angular margin config");
    return forward(batch, weights, cfg).losses;
}

LossVector add_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                               const MarginConfig& cfg) {
    if (cfg.kind != MarginKind::additive_cosine)
        throw std::invalid_argument("add loss requires an additive-cosine margin config");
    return forward(batch, weights, cfg).losses;
}

LossVector margin_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                                  const MarginConfig& cfg) {
    return forward(batch, weights, cfg).losses;
}

double is_aggregate(const LossVector& per_sample, Temperature temp, const LogDomain& domain) {
    return log_is_loss(per_sample, temp, domain);
}

double aggregate_value(const LossVector& per_sample, const AggregateSpec& spec) {
    if (per_sample.size() == 0) throw DomainError("loss vector is empty");
    if (spec.kind == Aggregate::mean_ce) return per_sample.mean();
    return is_aggregate(per_sample, spec.temp, spec.domain);
}

LossVector aggregate_gradient(const LossVector& per_sample, const AggregateSpec& spec) {
    if (per_sample.size() == 0) throw DomainError("loss vector is empty");
    if (spec.kind == Aggregate::mean_ce)
        return LossVector::Constant(per_sample.size(), 1.0 / static_cast<double>(per_sample.size()));
    return log_is_loss_grad(per_sample, spec.temp, spec.domain);
}

HeadGradients head_backward(const EmbeddingBatch& batch, const ClassWeights& weights,
                            const MarginConfig& cfg, const AggregateSpec& aggregate) {
    Forward f = forward(batch, weights, cfg);
    HeadGradients out;
    out.value = aggregate_value(f.losses, aggregate);
    const LossVector dloss = aggregate_gradient(f.losses, aggregate);

    const Eigen::Index n = f.logits.rows(), k = f.logits.cols();
    Eigen::MatrixXd grad_cos(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = batch.labels[static_cast<std::size_t>(i)];
        const Eigen::VectorXd z = f.logits.row(i).transpose();
        const double top = z.maxCoeff();
        Eigen::VectorXd p = (z.array() - top).exp().matrix();
        p /= p.sum();
        // p_y - 1 = -sum_{j != y} p_j, accumulated directly to avoid cancellation.
        double others = 0.0;
        for (Eigen::Index j = 0; j < k; ++j)
            if (j != y) others += p(j);
        p(y) = -others;
        grad_cos.row(i) = (dloss(i) * p.array() * f.dlogit_dcos.row(i).transpose().array()).matrix().transpose();
    }

    const Eigen::MatrixXd grad_unit_features = grad_cos * f.unit_weights.transpose();  // n x d
    const Eigen::MatrixXd grad_unit_weights = f.unit_features.transpose() * grad_cos;   // d x K

    out.features.resize(batch.features.rows(), batch.features.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        out.features.row(i) = normalize_backward(batch.features.row(i).transpose(),
                                                 f.unit_features.row(i).transpose(),
                                                 grad_unit_features.row(i).transpose())
                                  .transpose();
    out.class_weights.resize(weights.dim(), weights.classes());
    for (Eigen::Index j = 0; j < k; ++j)
        out.class_weights.col(j) =
            normalize_backward(weights.matrix.col(j), f.unit_weights.col(j), grad_unit_weights.col(j));

    out.per_sample = std::move(f.losses);
    return out;
}

}  // namespace isloss
