#pragma once

#include <mcaurora/engine.hpp>
#include <mcaurora/tasks.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcaurora {

/// Invalid experiment configuration. `line` is 1-based, or 0 when the
/// problem is not tied to a particular line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line = 0);
    int line() const { return _line; }

private:
    int _line;
};

struct ExperimentConfig {
    std::string case_name = "custom";
    std::uint64_t seed = 42;
    std::size_t replicates = 1;
    std::string output_dir;
    int threads = 1;

    std::string task = "walker";
    TaskParams task_params;

    std::size_t bin_budget = 400;
    std::vector<ContainerSpec> containers;

    SharingStrategy sharing = SharingStrategy::Shared;
    std::size_t init_budget = 500;
    std::size_t eval_budget = 5000;
    std::size_t batch_size = 100;
    double p_mut = 0.1;
    double eta = 20.0;
    CuriosityConfig curiosity;

    TrainingStrategy training = TrainingStrategy::Online;
    std::size_t training_period = 500;
    int latent_dim = 2;
    std::vector<int> hidden{16, 5};
    double dropout = 0.2;
    std::size_t n_quantiles = 1000;
    DiversityConfig diversity;
    TrainingConfig optimiser;

    bool fd_correlation = true;

    EngineConfig engine_config() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& cfg);

/// Parses and validates YAML text. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

/// 64-bit FNV-1a hash of the serialised config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

const std::vector<std::string>& preset_names();
/// Table 1 case `name` at paper scale, or at desk scale when `desk` is set.
ExperimentConfig preset(const std::string& name, bool desk);

} // namespace mcaurora
