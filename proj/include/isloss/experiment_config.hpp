#pragma once

// One JSON document describing a full experiment: training settings, margin
// head, the synthetic populations, pair generation and FAR levels. Unknown
// keys are rejected. Every random stream (population seeds, training seed) is
// derived from the single top-level "seed".

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "isloss/shift_bench.hpp"
#include "isloss/train_harness.hpp"

namespace isloss {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    TrainConfig train;
    std::vector<PopulationSpec> populations;
    std::string train_population;
    PairParams pairs;
    std::vector<double> far_levels{1e-2, 1e-3};

    const PopulationSpec& training_spec() const;
    /// Re-derives the population and training seeds from `root`.
    void reseed(std::uint64_t root);
    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace isloss
