#include "isloss/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "isloss/experiment_config.hpp"
#include "isloss/format.hpp"
#include "isloss/minimax_oracle.hpp"
#include "isloss/model_io.hpp"

namespace isloss {

namespace {

namespace fs = std::filesystem;

/// Validation problems map to exit code 2; anything else is a runtime failure.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

LossVector parse_losses(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw UsageError("cannot parse loss value '" + item + "'");
        }
        if (used != item.size()) throw UsageError("cannot parse loss value '" + item + "'");
        values.push_back(v);
    }
    if (values.empty()) throw UsageError("no loss values given");
    return Eigen::Map<const LossVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string join(const Eigen::VectorXd& v, char sep, int decimals) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += decimals >= 0 ? format_fixed(v(i), decimals) : format_number(v(i));
    }
    return s;
}

/// Collects every output file in memory, then writes them all or none.
class ArtifactSet {
public:
    explicit ArtifactSet(fs::path dir) : dir_(std::move(dir)) {}

    std::ostringstream& file(const std::string& name) {
        auto& slot = files_[name];
        if (!slot) slot = std::make_unique<std::ostringstream>();
        return *slot;
    }

    void commit() {
        std::vector<fs::path> staged, committed;
        try {
            fs::create_directories(dir_);
            for (const auto& [name, body] : files_) {
                const fs::path tmp = dir_ / (name + ".tmp");
                std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
                staged.push_back(tmp);
                os << body->str();
                os.close();
                if (!os) throw std::runtime_error("failed to write " + tmp.string());
            }
            for (const auto& [name, body] : files_) {
                const fs::path final_path = dir_ / name;
                fs::rename(dir_ / (name + ".tmp"), final_path);
                committed.push_back(final_path);
            }
        } catch (...) {
            std::error_code ec;
            for (const fs::path& p : staged) fs::remove(p, ec);
            for (const fs::path& p : committed) fs::remove(p, ec);
            throw;
        }
    }

private:
    fs::path dir_;
    std::map<std::string, std::unique_ptr<std::ostringstream>> files_;
};

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

ExperimentConfig load_config(const std::string& path, const GlobalOptions& g) {
    if (!fs::exists(path)) throw std::runtime_error("config file '" + path + "' does not exist");
    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(path);
    } catch (const ConfigError& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }
    if (g.seed) cfg.reseed(*g.seed);
    if (g.out_dir) cfg.output_dir = *g.out_dir;
    return cfg;
}

int cmd_weights(const std::string& losses_text, double temp, const std::string& kind,
                std::optional<double> epsilon, int precision, std::ostream& out) {
    const LossVector losses = parse_losses(losses_text);
    Temperature t(temp);
    WeightVector w;
    if (kind == "is")
        w = is_weights(losses, t);
    else if (kind == "logis")
        w = log_is_weights(losses, t, epsilon ? LogDomain::clamped(*epsilon) : LogDomain::strict());
    else
        throw UsageError("--kind must be 'is' or 'logis'");
    out << join(w, ',', precision) << '\n';
    out << "kl," << format_fixed(empirical_kl(w), precision) << '\n';
    return kExitOk;
}

void print_solution(std::ostream& out, const OracleSolution& s, const std::string& temperature,
                    double reference) {
    out << to_string(s.method) << ',' << to_string(s.regime) << ',' << format_number(s.objective) << ','
        << format_number(s.kl) << ',' << temperature << ',' << format_number(s.objective - reference) << ','
        << join(s.weights, ';', -1) << '\n';
}

int cmd_oracle(const std::string& losses_text, double budget_c, const std::string& method, int resolution,
               double step, int iters, std::ostream& out, std::ostream& err) {
    const LossVector losses = parse_losses(losses_text);
    const KlBudget budget(budget_c);
    if (method != "grid" && method != "ascent" && method != "both")
        throw UsageError("--method must be 'grid', 'ascent' or 'both'");

    const OracleSolution closed = solve_inner_max_closed_form(losses, budget);
    std::string temperature;
    try {
        temperature = format_number(temperature_for_budget(losses, budget).temperature.value());
    } catch (const DegenerateInput&) {
        temperature = "";
    }
    if (budget.exceeds_support(losses.size()))
        err << "note: budget " << budget_c << " >= log N; clamped to the point-mass regime\n";

    out << "method,regime,objective,kl,temperature,delta_objective,weights\n";
    print_solution(out, closed, temperature, closed.objective);
    if (method == "grid" || method == "both") {
        if (losses.size() > 4 && method == "both")
            err << "note: grid oracle skipped for N > 4\n";
        else
            print_solution(out, solve_inner_max_grid(losses, budget, resolution), "", closed.objective);
    }
    if (method == "ascent" || method == "both")
        print_solution(out, solve_inner_max_ascent(losses, budget, step, iters), "", closed.objective);
    return kExitOk;
}

int cmd_train(const std::string& config_path, const GlobalOptions& g, std::ostream& out) {
    const ExperimentConfig cfg = load_config(config_path, g);
    const LabeledDataset data = generate_population(cfg.training_spec());
    const TrainResult result = train(data, cfg.train);

    ArtifactSet artifacts(cfg.output_dir);
    write_trace_csv(artifacts.file("trace.csv"), result.trace);
    write_top_weights_csv(artifacts.file("top_weights.csv"), result.trace);
    auto& conc = artifacts.file("concentration.csv");
    conc << "epoch,kl,hardest_class,overlap\n";
    for (const ConcentrationRow& row : weight_concentration_report(result.trace))
        conc << row.epoch << ',' << format_number(row.kl) << ','
             << (row.hardest_classes.empty() ? -1 : row.hardest_classes.front()) << ','
             << format_number(row.overlap) << '\n';
    write_model(artifacts.file("model.txt"), result.model);
    artifacts.commit();
    out << "trained " << result.trace.size() << " epochs on '" << data.name << "'; outputs in "
        << cfg.output_dir << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& config_path,
             const std::optional<std::string>& baseline_path, const GlobalOptions& g, std::ostream& out) {
    const ExperimentConfig cfg = load_config(config_path, g);
    auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
        return read_model(in);
    };
    const ModelParams model = load(model_path);
    if (model.input_dim() != cfg.training_spec().input_dim())
        throw UsageError("model input dimension does not match the populations");

    const CrossPopulationResult result =
        cross_population_eval(model, cfg.train_population, cfg.populations, cfg.pairs, cfg.far_levels);

    ArtifactSet artifacts(cfg.output_dir);
    write_report_csv(artifacts.file("report.csv"), result, cfg.far_levels);
    auto& shift = artifacts.file("shift.csv");
    shift << "test_population,kl_from_train\n";
    for (const PopulationResult& row : result.rows) {
        shift << row.population << ',' << format_number(row.kl_from_train) << '\n';
        write_hard_pairs_csv(artifacts.file("hard_pairs_" + row.population + ".csv"), row.report);
    }
    if (baseline_path) {
        const CrossPopulationResult base =
            cross_population_eval(load(*baseline_path), cfg.train_population, cfg.populations, cfg.pairs, cfg.far_levels);
        const std::vector<double> gains = accuracy_gains(base, result);
        auto& g_csv = artifacts.file("gains.csv");
        g_csv << "test_population,baseline_accuracy,accuracy,gain\n";
        for (std::size_t i = 0; i < gains.size(); ++i)
            g_csv << result.rows[i].population << ',' << format_number(base.rows[i].report.accuracy) << ','
                  << format_number(result.rows[i].report.accuracy) << ',' << format_number(gains[i]) << '\n';
    }
    artifacts.commit();
    out << "evaluated " << result.rows.size() << " populations; outputs in " << cfg.output_dir << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Importance-sampling robust losses: weights, minimax oracles, training and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::uint64_t seed_value = 0;
    std::string out_dir_value;
    auto* seed_opt = app.add_option("--seed", seed_value, "Root seed (overrides the config)");
    auto* out_opt = app.add_option("--out-dir", out_dir_value, "Output directory (overrides the config)");

    std::string losses, kind = "is", method = "both", config, model, baseline;
    double temp = 0.0, budget = 0.0, step = 0.01, epsilon = 0.0;
    int precision = 4, resolution = 400, iters = 20000;

    auto* weights = app.add_subcommand("weights", "Print IS / LogIS weights and their empirical KL");
    weights->add_option("--losses", losses, "Comma-separated per-sample losses")->required();
    weights->add_option("--temp", temp, "Temperature T")->required();
    weights->add_option("--kind", kind, "is | logis");
    auto* eps_opt = weights->add_option("--epsilon", epsilon, "Clamp LogIS losses below epsilon instead of failing");
    weights->add_option("--precision", precision, "Decimals printed");

    auto* oracle = app.add_subcommand("oracle", "Solve the KL-constrained inner maximum and compare to the closed form");
    oracle->add_option("--losses", losses, "Comma-separated per-sample losses")->required();
    oracle->add_option("--budget", budget, "KL budget C (nats)")->required();
    oracle->add_option("--method", method, "grid | ascent | both");
    oracle->add_option("--resolution", resolution, "Grid resolution");
    oracle->add_option("--step", step, "Ascent step size");
    oracle->add_option("--iters", iters, "Ascent iterations");

    auto* train_cmd = app.add_subcommand("train", "Train a model from an experiment config");
    train_cmd->add_option("--config", config, "Experiment config (JSON)")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Cross-population verification of a trained model");
    eval_cmd->add_option("--model", model, "Model file written by 'train'")->required();
    eval_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    auto* baseline_opt = eval_cmd->add_option("--baseline-model", baseline, "Baseline model for accuracy gains");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }
    if (*seed_opt) g.seed = seed_value;
    if (*out_opt) g.out_dir = out_dir_value;

    try {
        if (*weights)
            return cmd_weights(losses, temp, kind, *eps_opt ? std::optional<double>(epsilon) : std::nullopt,
                               precision, out);
        if (*oracle) return cmd_oracle(losses, budget, method, resolution, step, iters, out, err);
        if (*train_cmd) return cmd_train(config, g, out);
        if (*eval_cmd)
            return cmd_eval(model, config, *baseline_opt ? std::optional<std::string>(baseline) : std::nullopt, g, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UnsupportedSize& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace isloss
