#pragma once

// Margin-softmax heads on normalised embeddings and normalised class weights.
//
//   additive-angular:  target logit s cos(theta_y + m)
//   additive-cosine:   target logit s (cos theta_y - m)
//   non-target logits: s cos theta_j
//
// Per-sample cross-entropies can then be averaged (mean-ce) or aggregated
// with LogISloss over the batch (log-is).

#include <string>
#include <vector>

#include <Eigen/Core>

#include "isloss/loss_core.hpp"

namespace isloss {

enum class MarginKind { additive_angular, additive_cosine };

struct MarginConfig {
    double scale = 64.0;
    double margin = 0.5;
    MarginKind kind = MarginKind::additive_angular;

    static MarginConfig arc(double scale = 64.0, double margin = 0.5) {
        return {scale, margin, MarginKind::additive_angular};
    }
    static MarginConfig add(double scale = 64.0, double margin = 0.35) {
        return {scale, margin, MarginKind::additive_cosine};
    }
    void validate() const;
};

/// n x d raw features with one label in [0, K) per row.
struct EmbeddingBatch {
    Eigen::MatrixXd features;
    std::vector<int> labels;

    Eigen::Index size() const { return features.rows(); }
};

/// d x K class weights, one column per class. Bias is always zero.
struct ClassWeights {
    Eigen::MatrixXd matrix;

    Eigen::Index classes() const { return matrix.cols(); }
    Eigen::Index dim() const { return matrix.rows(); }
};

enum class Aggregate { mean_ce, log_is };

std::string to_string(MarginKind k);
std::string to_string(Aggregate a);
MarginKind parse_margin_kind(const std::string& s);
Aggregate parse_aggregate(const std::string& s);

/// Selected batch objective: mean cross-entropy, or LogISloss at `temp`.
struct AggregateSpec {
    Aggregate kind = Aggregate::mean_ce;
    Temperature temp{0.5};
    LogDomain domain = LogDomain::strict();
};

/// Cosines are clamped to [-1 + delta, 1 - delta] before arccos.
inline constexpr double kCosineClamp = 1e-7;
/// Rows/columns with norm below this are divided by it instead of their norm.
inline constexpr double kNormFloor = 1e-12;

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m);

/// n x K matrix of cos(theta_{j,i}) between normalised rows and columns.
Eigen::MatrixXd cosine_matrix(const EmbeddingBatch& batch, const ClassWeights& weights);

/// Numerically stable -log softmax(z)_target.
double softmax_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int target);

LossVector arc_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                               const MarginConfig& cfg);
LossVector add_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                               const MarginConfig& cfg);
/// Dispatches on cfg.kind.
LossVector margin_loss_per_sample(const EmbeddingBatch& batch, const ClassWeights& weights,
                                  const MarginConfig& cfg);

/// IS-ArcLoss / IS-AddLoss: LogISloss over the batch's per-sample losses.
double is_aggregate(const LossVector& per_sample, Temperature temp,
                    const LogDomain& domain = LogDomain::strict());

double aggregate_value(const LossVector& per_sample, const AggregateSpec& spec);
/// dA/dL_i for the selected aggregate.
LossVector aggregate_gradient(const LossVector& per_sample, const AggregateSpec& spec);

struct HeadGradients {
    double value = 0.0;
    LossVector per_sample;
    Eigen::MatrixXd features;       // n x d, w.r.t. raw features
    Eigen::MatrixXd class_weights;  // d x K, w.r.t. raw class weights
};

/// Forward pass plus the exact gradient of the selected aggregate.
HeadGradients head_backward(const EmbeddingBatch& batch, const ClassWeights& weights,
                            const MarginConfig& cfg, const AggregateSpec& aggregate);

}  // namespace isloss
