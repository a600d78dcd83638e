#pragma once

// Desk-scale trainer: a linear projection into an embedding space followed
// by a margin-softmax head, optimised with heavy-ball SGD, weight decay and a
// step learning-rate schedule. Every epoch ends with a full forward pass that
// records the LogISloss weights of the whole training set.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

#include "isloss/dataset.hpp"
#include "isloss/margin_head.hpp"

namespace isloss {

struct ModelParams {
    Eigen::MatrixXd projection;  // d_in x d
    ClassWeights class_weights;  // d x K

    Eigen::Index input_dim() const { return projection.rows(); }
    Eigen::Index embedding_dim() const { return projection.cols(); }
    Eigen::Index classes() const { return class_weights.classes(); }

    /// inputs (n x d_in) -> embeddings (n x d)
    Eigen::MatrixXd embed(const Eigen::MatrixXd& inputs) const;
};

struct TrainConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 128;
    int epochs = 20;
    std::vector<int> lr_decay_epochs;
    double lr_decay_factor = 10.0;
    Temperature temp{0.5};
    Aggregate aggregate = Aggregate::log_is;
    std::uint64_t seed = 0;

    int embedding_dim = 32;
    MarginConfig margin = MarginConfig::arc();
    double log_epsilon = 1e-12;  // LogISloss clamp used during training
    int top_k = 10;

    void validate() const;
    AggregateSpec aggregate_spec() const;
};

struct WeightedSample {
    int sample_id = 0;
    int class_id = 0;
    double weight = 0.0;
};

struct EpochTrace {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double aggregate_loss = 0.0;
    double lr = 0.0;
    double kl_concentration = 0.0;  // empirical_kl of `weights`
    std::map<int, double> per_class_accuracy;
    std::vector<WeightedSample> top_weights;  // descending by weight, ties by id
    WeightVector weights;                     // LogISloss weights over the full training set
};

struct TrainResult {
    ModelParams model;
    std::vector<EpochTrace> trace;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::vector<EpochTrace> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<EpochTrace>& trace() const { return trace_; }

private:
    std::vector<EpochTrace> trace_;
};

/// Uniform(-1, 1) / sqrt(d_in) entries for both the projection and the class weights.
ModelParams init_model(Eigen::Index input_dim, Eigen::Index embedding_dim, Eigen::Index classes,
                       std::uint64_t seed);

/// lr * factor^-(number of decay epochs <= epoch)
double learning_rate_at(const TrainConfig& cfg, int epoch);

/// Heavy-ball step: v <- mu v + (g + wd * theta);  theta <- theta - lr v.
void sgd_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& velocity,
              double lr, double momentum, double weight_decay);

/// Objective and parameter gradients of the head on a batch of raw inputs.
struct ModelGradients {
    double value = 0.0;
    LossVector per_sample;
    Eigen::MatrixXd projection;
    Eigen::MatrixXd class_weights;
};
ModelGradients model_backward(const ModelParams& model, const Eigen::MatrixXd& inputs,
                              const std::vector<int>& labels, const MarginConfig& margin,
                              const AggregateSpec& aggregate);

/// Full forward pass and instrumentation for one epoch.
EpochTrace evaluate_epoch(const ModelParams& model, const LabeledDataset& data, const TrainConfig& cfg,
                          int epoch);

/// Deterministic given cfg.seed. epochs == 0 returns the initial model and an
/// empty trace. Throws TrainingDiverged (carrying the trace so far) on a
/// non-finite loss.
TrainResult train(const LabeledDataset& data, const TrainConfig& cfg);

/// Central differences over every parameter; max over parameters of
/// |a - n| / max(|a|, |n|, 1e-4 * max|gradient|).
double gradient_check(const ModelParams& model, const Eigen::MatrixXd& inputs,
                      const std::vector<int>& labels, const MarginConfig& margin,
                      const AggregateSpec& aggregate);

struct ConcentrationRow {
    int epoch = 0;
    double kl = 0.0;
    std::vector<int> hardest_classes;          // lowest per-class accuracy first
    std::map<int, double> top_mass_by_class;   // share of top-k weight mass per class
    double overlap = 0.0;  // fraction of top-k samples whose class is among hardest_classes
};

/// Per epoch: concentration of the IS weights and how the top-k weights line
/// up with the `bottom_classes` least accurate classes.
std::vector<ConcentrationRow> weight_concentration_report(const std::vector<EpochTrace>& trace,
                                                          int bottom_classes = 1);

/// CSV: epoch,mean_loss,aggregate_loss,lr,kl_concentration
void write_trace_csv(std::ostream& os, const std::vector<EpochTrace>& trace);
/// CSV: epoch,sample_id,class_id,weight
void write_top_weights_csv(std::ostream& os, const std::vector<EpochTrace>& trace);

}  // namespace isloss
