// bench <experiment> [--config file.json] [--preset name] --out <dir> --seed <u64> [--runs N] [--jobs N]
//
// Exit codes: 0 success, 1 a verify check failed, 2 configuration error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "benign/bench/config.hpp"
#include "benign/bench/report.hpp"
#include "benign/bench/sweep.hpp"
#include "benign/bench/verify.hpp"

using namespace benign;
using namespace benign::bench;

namespace {

std::string default_preset(Experiment e) {
    switch (e) {
        case Experiment::alpha_sweep: return "fig1_top";
        case Experiment::beta_sweep: return "fig1_bottom";
        case Experiment::dim_sweep: return "fig3";
        default: return "fig2";
    }
}

SweepConfig build_config(Experiment experiment, const std::string& config_path, std::string preset) {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file " + config_path);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        if (j.contains("experiment") && j.at("experiment") != experiment_name(experiment))
            throw ConfigError("config experiment does not match the command line");
        if (preset.empty() && j.contains("preset")) preset = j.at("preset").get<std::string>();
    }
    if (preset.empty()) preset = default_preset(experiment);
    SweepConfig cfg = apply_config_json(preset_config(preset, experiment), j);
    cfg.preset = preset;
    return cfg;
}

int run_verify_cli(std::uint64_t seed) {
    const auto results = run_verify(seed, [](const CheckResult& r) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.passed) std::cout << ": " << r.detail;
        std::cout << std::endl;
    });
    const bool ok = results.size() == invariant_checks().size() && results.back().passed;
    std::cout << (ok ? "verify: all checks passed" : "verify: failed at " + results.back().name) << std::endl;
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep linear network interpolation experiments"};
    std::string experiment_arg, config_path, preset, out_dir = "out";
    std::uint64_t seed = 0;
    std::optional<std::size_t> runs, jobs;
    app.add_option("experiment", experiment_arg,
                   "alpha_sweep | beta_sweep | dim_sweep | relu_alpha | relu_beta | verify")
        ->required();
    app.add_option("--config", config_path, "JSON config overlaid on the preset");
    app.add_option("--preset", preset, "fig1_top | fig1_bottom | fig1_caption | fig2 | fig2_caption | fig3");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--runs", runs, "runs per grid point");
    app.add_option("--jobs", jobs, "worker threads");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Experiment experiment = parse_experiment(experiment_arg);
        if (experiment == Experiment::verify) return run_verify_cli(seed);

        SweepConfig cfg = build_config(experiment, config_path, preset);
        cfg.master_seed = seed;
        cfg.output_dir = out_dir;
        if (runs) cfg.runs = *runs;
        if (jobs) cfg.jobs = *jobs;
        cfg.validate();

        auto progress = [](const RunRecord& r) {
            std::cerr << "grid " << r.grid_index << " (" << r.grid_value << ") run " << r.run << ": "
                      << (r.ok ? "risk " + std::to_string(r.excess_risk) : "failed: " + r.error) << std::endl;
        };
        const SweepResults res = is_relu(experiment) ? run_relu_experiment(cfg, progress) : run_sweep(cfg, progress);
        emit_report(res, cfg.output_dir);
        for (const auto& p : res.points)
            std::cout << p.grid_value << ": risk " << p.excess_risk.mean << " +- " << p.excess_risk.half_width
                      << " (median " << p.excess_risk.median << "), failures " << p.failures << std::endl;
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }
}
