#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "benign/trainer.hpp"

namespace benign::bench {

enum class Experiment { alpha_sweep, beta_sweep, dim_sweep, relu_alpha, relu_beta, verify };

std::string experiment_name(Experiment e);
/// Throws ConfigError on unknown names.
Experiment parse_experiment(const std::string& name);
bool is_relu(Experiment e);

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

struct LinearParams {
    std::size_t d = 1000;
    std::size_t q = 3;
    std::size_t spike_k = 10;
    double spike_eps = 0.01;
    double noise = 1.0;
    std::size_t depth = 3;
    std::size_t width_factor = 10;      // m = width_factor (d + q) unless width is set
    std::optional<std::size_t> width;
    double alpha = 1.0;                 // non-swept scales
    double beta = 1.0;
    bool reduced_init = true;           // sample the compressed network directly

    std::size_t width_for(std::size_t d_value) const;
};

struct ReluParams {
    std::size_t d = 10;
    std::size_t q = 3;
    std::size_t teacher_width = 10;
    std::size_t student_width = 50;
    std::size_t depth = 3;
    double noise = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
    double step_growth = 1.0;  // see MlpTrainConfig::growth
};

struct SweepConfig {
    Experiment experiment = Experiment::alpha_sweep;
    std::string preset;
    std::vector<double> grid;
    std::size_t n = 100;
    std::size_t runs = 20;
    std::size_t mc_n = 0;  // Monte-Carlo test points per run (0 = skip)
    LinearParams linear;
    ReluParams relu;
    TrainConfig train;
    std::filesystem::path output_dir = "out";
    std::uint64_t master_seed = 0;
    std::size_t jobs = 1;
    bool save_traces = false;

    /// Throws ConfigError.
    void validate() const;
};

/// Named setups: fig1_top (alpha sweep), fig1_bottom (beta sweep), fig2
/// (ReLU, teacher width 10), fig2_caption (ReLU, teacher width 50),
/// fig1_caption (linear, middle width 50), fig3 (input-dimension sweep).
/// `experiment` picks the swept quantity where a preset covers several.
SweepConfig preset_config(const std::string& name, Experiment experiment);
std::vector<std::string> preset_names();

/// Overlay a JSON object onto `base`. Unknown keys are rejected.
SweepConfig apply_config_json(SweepConfig base, const nlohmann::json& j);
nlohmann::json config_to_json(const SweepConfig& cfg);

}  // namespace benign::bench
