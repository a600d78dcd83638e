#include "isloss/experiment_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "isloss/seed.hpp"

namespace isloss {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kPopulationStream = 1000;

void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items())
        if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid value for '" + std::string(key) + "' in " + where);
    }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
    T out{};
    read(obj, key, out, where);
    return out;
}

void parse_train(const json& j, TrainConfig& t) {
    const std::string where = "train";
    require_keys(j, where, {"lr", "momentum", "weight_decay", "batch_size", "epochs", "lr_decay_epochs",
                            "lr_decay_factor", "temperature", "aggregate", "embedding_dim", "log_epsilon", "top_k"});
    read(j, "lr", t.lr, where);
    read(j, "momentum", t.momentum, where);
    read(j, "weight_decay", t.weight_decay, where);
    read(j, "batch_size", t.batch_size, where);
    read(j, "epochs", t.epochs, where);
    read(j, "lr_decay_epochs", t.lr_decay_epochs, where);
    read(j, "lr_decay_factor", t.lr_decay_factor, where);
    read(j, "embedding_dim", t.embedding_dim, where);
    read(j, "log_epsilon", t.log_epsilon, where);
    read(j, "top_k", t.top_k, where);
    if (j.contains("temperature")) {
        try {
            t.temp = Temperature(required<double>(j, "temperature", where));
        } catch (const DomainError& e) {
            throw ConfigError(std::string("train.temperature: ") + e.what());
        }
    }
    if (j.contains("aggregate")) {
        try {
            t.aggregate = parse_aggregate(required<std::string>(j, "aggregate", where));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("train.aggregate: ") + e.what());
        }
    }
}

void parse_margin(const json& j, MarginConfig& m) {
    const std::string where = "margin";
    require_keys(j, where, {"kind", "scale", "margin"});
    if (j.contains("kind")) {
        try {
            m = parse_margin_kind(required<std::string>(j, "kind", where)) == MarginKind::additive_angular
                    ? MarginConfig::arc()
                    : MarginConfig::add();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("margin.kind: ") + e.what());
        }
    }
    read(j, "scale", m.scale, where);
    read(j, "margin", m.margin, where);
}

PopulationSpec parse_population(const json& j, std::size_t index) {
    const std::string where = "populations[" + std::to_string(index) + "]";
    require_keys(j, where, {"name", "class_count", "samples_per_class", "class_center_spread",
                            "within_class_noise", "nuisance_noise", "identity_dims", "shift"});
    PopulationSpec p;
    p.name = required<std::string>(j, "name", where);
    read(j, "class_count", p.class_count, where);
    read(j, "samples_per_class", p.samples_per_class, where);
    read(j, "class_center_spread", p.class_center_spread, where);
    read(j, "within_class_noise", p.within_class_noise, where);
    read(j, "nuisance_noise", p.nuisance_noise, where);
    read(j, "identity_dims", p.identity_dims, where);
    const auto shift = required<std::vector<double>>(j, "shift", where);
    p.shift = Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
    return p;
}

void parse_pairs(const json& j, PairParams& p) {
    const std::string where = "pairs";
    require_keys(j, where, {"positives_per_class", "negatives_total", "folds", "hard_k"});
    read(j, "positives_per_class", p.positives_per_class, where);
    read(j, "negatives_total", p.negatives_total, where);
    read(j, "folds", p.folds, where);
    read(j, "hard_k", p.hard_k, where);
}

}  // namespace

const PopulationSpec& ExperimentConfig::training_spec() const {
    const auto it = std::find_if(populations.begin(), populations.end(),
                                 [&](const PopulationSpec& p) { return p.name == train_population; });
    if (it == populations.end()) throw ConfigError("train_population '" + train_population + "' is not listed");
    return *it;
}

void ExperimentConfig::reseed(std::uint64_t root) {
    seed = root;
    train.seed = mix_seed(root, kTrainStream);
    for (std::size_t i = 0; i < populations.size(); ++i) populations[i].seed = mix_seed(root, kPopulationStream + i);
}

void ExperimentConfig::validate() const {
    try {
        train.validate();
        if (populations.empty()) throw ConfigError("at least one population is required");
        std::set<std::string> names;
        for (const PopulationSpec& p : populations) {
            p.validate();
            if (p.name.empty() || p.name.find(',') != std::string::npos || p.name.find('/') != std::string::npos)
                throw ConfigError("population names must be non-empty and contain no ',' or '/'");
            if (!names.insert(p.name).second) throw ConfigError("duplicate population name '" + p.name + "'");
            if (p.input_dim() != populations.front().input_dim())
                throw ConfigError("all populations must share the input dimension");
        }
        training_spec();
        if (pairs.positives_per_class < 1 || pairs.negatives_total < 1)
            throw ConfigError("pair counts must be positive");
        if (pairs.folds < 2) throw ConfigError("at least two folds are required");
        if (pairs.hard_k < 0) throw ConfigError("hard_k must be non-negative");
        for (double level : far_levels)
            if (!(level > 0.0 && level < 1.0)) throw ConfigError("FAR levels must lie in (0, 1)");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(root, "config", {"seed", "output_dir", "train", "margin", "populations", "train_population",
                                  "pairs", "far_levels"});
    ExperimentConfig cfg;
    read(root, "output_dir", cfg.output_dir, "config");
    if (root.contains("train")) parse_train(root.at("train"), cfg.train);
    if (root.contains("margin")) parse_margin(root.at("margin"), cfg.train.margin);
    if (!root.contains("populations") || !root.at("populations").is_array())
        throw ConfigError("config needs a 'populations' array");
    const json& pops = root.at("populations");
    for (std::size_t i = 0; i < pops.size(); ++i) cfg.populations.push_back(parse_population(pops[i], i));
    cfg.train_population = required<std::string>(root, "train_population", "config");
    if (root.contains("pairs")) parse_pairs(root.at("pairs"), cfg.pairs);
    read(root, "far_levels", cfg.far_levels, "config");
    cfg.reseed(required<std::uint64_t>(root, "seed", "config"));
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

}  // namespace isloss
