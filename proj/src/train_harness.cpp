#include "isloss/train_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "isloss/finite_difference.hpp"
#include "isloss/format.hpp"

namespace isloss {

namespace {

// Fisher-Yates with the raw engine output so the permutation does not depend
// on the standard library's distribution implementation.
void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
    return out;
}

bool finite(const ModelParams& m) {
    return m.projection.allFinite() && m.class_weights.matrix.allFinite();
}

}  // namespace

Eigen::MatrixXd ModelParams::embed(const Eigen::MatrixXd& inputs) const {
    if (inputs.cols() != projection.rows())
        throw std::invalid_argument("input dimension does not match the projection");
    return inputs * projection;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw std::invalid_argument("weight decay must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (!(lr_decay_factor > 0.0) || !std::isfinite(lr_decay_factor))
        throw std::invalid_argument("lr decay factor must be positive");
    if (embedding_dim < 1) throw std::invalid_argument("embedding dimension must be positive");
    if (!(log_epsilon > 0.0)) throw std::invalid_argument("log epsilon must be positive");
    if (top_k < 1) throw std::invalid_argument("top_k must be positive");
    margin.validate();
}

AggregateSpec TrainConfig::aggregate_spec() const {
    return {aggregate, temp, LogDomain::clamped(log_epsilon)};
}

ModelParams init_model(Eigen::Index input_dim, Eigen::Index embedding_dim, Eigen::Index classes,
                       std::uint64_t seed) {
    if (input_dim < 1 || embedding_dim < 1 || classes < 1)
        throw std::invalid_argument("model dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    ModelParams m;
    m.projection = Eigen::MatrixXd::NullaryExpr(input_dim, embedding_dim, [&] { return scale * unit(rng); });
    m.class_weights.matrix =
        Eigen::MatrixXd::NullaryExpr(embedding_dim, classes, [&] { return scale * unit(rng); });
    return m;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
    const auto decays = std::count_if(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(),
                                      [epoch](int e) { return e <= epoch; });
    return cfg.lr * std::pow(cfg.lr_decay_factor, -static_cast<double>(decays));
}

void sgd_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& velocity,
              double lr, double momentum, double weight_decay) {
    if (velocity.rows() != param.rows() || velocity.cols() != param.cols())
        velocity = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    velocity = momentum * velocity + grad + weight_decay * param;
    param -= lr * velocity;
}

ModelGradients model_backward(const ModelParams& model, const Eigen::MatrixXd& inputs,
                              const std::vector<int>& labels, const MarginConfig& margin,
                              const AggregateSpec& aggregate) {
    EmbeddingBatch batch{model.embed(inputs), labels};
    HeadGradients head = head_backward(batch, model.class_weights, margin, aggregate);
    ModelGradients out;
    out.value = head.value;
    out.per_sample = std::move(head.per_sample);
    out.projection = inputs.transpose() * head.features;
    out.class_weights = std::move(head.class_weights);
    return out;
}

EpochTrace evaluate_epoch(const ModelParams& model, const LabeledDataset& data, const TrainConfig& cfg,
                          int epoch) {
    EmbeddingBatch batch{model.embed(data.inputs), data.labels};
    const LossVector losses = margin_loss_per_sample(batch, model.class_weights, cfg.margin);
    const AggregateSpec spec = cfg.aggregate_spec();

    EpochTrace t;
    t.epoch = epoch;
    t.lr = learning_rate_at(cfg, epoch);
    t.mean_loss = losses.mean();
    t.aggregate_loss = aggregate_value(losses, spec);
    if (!std::isfinite(t.mean_loss) || !std::isfinite(t.aggregate_loss)) return t;

    t.weights = log_is_weights(losses, cfg.temp, spec.domain);
    t.kl_concentration = empirical_kl(t.weights);

    // Plain nearest-class-weight accuracy (no margin).
    const Eigen::MatrixXd cos = cosine_matrix(batch, model.class_weights);
    std::map<int, int> correct, total;
    for (Eigen::Index i = 0; i < cos.rows(); ++i) {
        Eigen::Index predicted = 0;
        cos.row(i).maxCoeff(&predicted);
        const int y = data.labels[static_cast<std::size_t>(i)];
        ++total[y];
        if (predicted == y) ++correct[y];
    }
    for (const auto& [cls, count] : total) t.per_class_accuracy[cls] = static_cast<double>(correct[cls]) / count;

    std::vector<int> order(static_cast<std::size_t>(t.weights.size()));
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](int a, int b) {
                          return t.weights(a) != t.weights(b) ? t.weights(a) > t.weights(b) : a < b;
                      });
    for (std::size_t r = 0; r < k; ++r)
        t.top_weights.push_back({order[r], data.labels[static_cast<std::size_t>(order[r])], t.weights(order[r])});
    return t;
}

TrainResult train(const LabeledDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("training set is empty");
    if (static_cast<std::size_t>(data.size()) != data.labels.size())
        throw std::invalid_argument("label count does not match inputs");
    if (data.classes < 1) throw std::invalid_argument("training set has no classes");

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    result.model = init_model(data.input_dim(), cfg.embedding_dim, data.classes, rng());
    if (cfg.epochs == 0) return result;

    ModelParams& model = result.model;
    Eigen::MatrixXd v_proj, v_cls;
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    const AggregateSpec spec = cfg.aggregate_spec();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                        order.begin() + static_cast<std::ptrdiff_t>(stop));
            std::vector<int> labels;
            labels.reserve(rows.size());
            for (int r : rows) labels.push_back(data.labels[static_cast<std::size_t>(r)]);

            ModelGradients g;
            try {
                g = model_backward(model, gather_rows(data.inputs, rows), labels, cfg.margin, spec);
            } catch (const DomainError& e) {
                throw TrainingDiverged(std::string("epoch ") + std::to_string(epoch) + ": " + e.what(), result.trace);
            }
            if (!std::isfinite(g.value) || !g.projection.allFinite() || !g.class_weights.allFinite())
                throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch), result.trace);
            sgd_step(model.projection, g.projection, v_proj, lr, cfg.momentum, cfg.weight_decay);
            sgd_step(model.class_weights.matrix, g.class_weights, v_cls, lr, cfg.momentum, cfg.weight_decay);
        }
        if (!finite(model)) throw TrainingDiverged("non-finite parameters after epoch " + std::to_string(epoch), result.trace);
        EpochTrace t = evaluate_epoch(model, data, cfg, epoch);
        if (!std::isfinite(t.mean_loss) || !std::isfinite(t.aggregate_loss))
            throw TrainingDiverged("non-finite epoch loss at epoch " + std::to_string(epoch), result.trace);
        result.trace.push_back(std::move(t));
    }
    return result;
}

double gradient_check(const ModelParams& model, const Eigen::MatrixXd& inputs,
                      const std::vector<int>& labels, const MarginConfig& margin,
                      const AggregateSpec& aggregate) {
    const ModelGradients analytic = model_backward(model, inputs, labels, margin, aggregate);
    const Eigen::Index np = model.projection.size();
    const Eigen::Index nw = model.class_weights.matrix.size();

    Eigen::VectorXd theta(np + nw);
    theta << model.projection.reshaped(), model.class_weights.matrix.reshaped();
    Eigen::VectorXd exact(np + nw);
    exact << analytic.projection.reshaped(), analytic.class_weights.reshaped();

    auto objective = [&](const Eigen::VectorXd& p) {
        ModelParams probe;
        probe.projection = p.head(np).reshaped(model.projection.rows(), model.projection.cols());
        probe.class_weights.matrix =
            p.tail(nw).reshaped(model.class_weights.matrix.rows(), model.class_weights.matrix.cols());
        EmbeddingBatch batch{probe.embed(inputs), labels};
        return aggregate_value(margin_loss_per_sample(batch, probe.class_weights, margin), aggregate);
    };
    const Eigen::VectorXd numeric = central_difference(objective, theta);
    const double scale = std::max(exact.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
    return max_relative_error(exact, numeric, std::max(1e-4 * scale, 1e-300));
}

std::vector<ConcentrationRow> weight_concentration_report(const std::vector<EpochTrace>& trace,
                                                          int bottom_classes) {
    std::vector<ConcentrationRow> rows;
    for (const EpochTrace& t : trace) {
        ConcentrationRow row;
        row.epoch = t.epoch;
        row.kl = t.weights.size() > 0 ? empirical_kl(t.weights) : t.kl_concentration;

        std::vector<std::pair<int, double>> acc(t.per_class_accuracy.begin(), t.per_class_accuracy.end());
        std::stable_sort(acc.begin(), acc.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(bottom_classes, 0)), acc.size());
        for (std::size_t i = 0; i < keep; ++i) row.hardest_classes.push_back(acc[i].first);

        double mass = 0.0;
        for (const WeightedSample& s : t.top_weights) mass += s.weight;
        int hits = 0;
        for (const WeightedSample& s : t.top_weights) {
            row.top_mass_by_class[s.class_id] += mass > 0.0 ? s.weight / mass : 0.0;
            if (std::find(row.hardest_classes.begin(), row.hardest_classes.end(), s.class_id) !=
                row.hardest_classes.end())
                ++hits;
        }
        row.overlap = t.top_weights.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(t.top_weights.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_trace_csv(std::ostream& os, const std::vector<EpochTrace>& trace) {
    os << "epoch,mean_loss,aggregate_loss,lr,kl_concentration\n";
    for (const EpochTrace& t : trace)
        os << t.epoch << ',' << format_number(t.mean_loss) << ',' << format_number(t.aggregate_loss) << ','
           << format_number(t.lr) << ',' << format_number(t.kl_concentration) << '\n';
}

void write_top_weights_csv(std::ostream& os, const std::vector<EpochTrace>& trace) {
    os << "epoch,sample_id,class_id,weight\n";
    for (const EpochTrace& t : trace)
        for (const WeightedSample& s : t.top_weights)
            os << t.epoch << ',' << s.sample_id << ',' << s.class_id << ',' << format_number(s.weight) << '\n';
}

}  // namespace isloss
