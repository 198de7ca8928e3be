#include "benign/bench/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace benign::bench {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

TrainConfig sweep_training() {
    TrainConfig t;
    DescentMode d;
    d.step_size = 1e-4;  // upper limit; the norm-based step is far smaller at these widths
    d.auto_step = true;
    t.mode = d;
    t.loss_tolerance = 1e-7;
    t.max_steps = 200'000;
    t.record_every = 50;
    t.norm_options.tolerance = 1e-6;
    return t;
}

}  // namespace

std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::alpha_sweep: return "alpha_sweep";
        case Experiment::beta_sweep: return "beta_sweep";
        case Experiment::dim_sweep: return "dim_sweep";
        case Experiment::relu_alpha: return "relu_alpha";
        case Experiment::relu_beta: return "relu_beta";
        case Experiment::verify: return "verify";
    }
    return "unknown";
}

Experiment parse_experiment(const std::string& name) {
    for (auto e : {Experiment::alpha_sweep, Experiment::beta_sweep, Experiment::dim_sweep,
                   Experiment::relu_alpha, Experiment::relu_beta, Experiment::verify})
        if (experiment_name(e) == name) return e;
    throw ConfigError("unknown experiment '" + name + "'");
}

bool is_relu(Experiment e) { return e == Experiment::relu_alpha || e == Experiment::relu_beta; }

std::size_t LinearParams::width_for(std::size_t d_value) const {
    return width ? *width : width_factor * (d_value + q);
}

void SweepConfig::validate() const {
    if (experiment == Experiment::verify) return;
    if (grid.empty()) throw ConfigError("grid must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw ConfigError("grid values must be finite");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("grid must be strictly increasing");
    }
    if (runs < 2) throw ConfigError("runs must be at least 2 for confidence intervals");
    if (n < 1) throw ConfigError("n must be positive");
    if (jobs < 1) throw ConfigError("jobs must be positive");
    if (experiment == Experiment::dim_sweep) {
        for (double v : grid)
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("dim_sweep grid values must be positive integers");
    } else {
        for (double v : grid)
            if (!(v >= 0.0)) throw ConfigError("scale grid values must be non-negative");
    }
    if (is_relu(experiment)) {
        if (relu.depth < 2 || relu.d < 1 || relu.q < 1 || relu.student_width < 1 || relu.teacher_width < 1)
            throw ConfigError("relu dimensions must be positive and depth >= 2");
        if (mc_n < 2) throw ConfigError("ReLU experiments need mc_n >= 2 test points");
        if (!(relu.step_growth >= 1.0 && std::isfinite(relu.step_growth)))
            throw ConfigError("relu.step_growth must be finite and >= 1");
    } else {
        if (linear.depth < 2 || linear.q < 1 || linear.d < 1) throw ConfigError("linear dimensions must be positive and depth >= 2");
        if (!(linear.spike_eps > 0.0 && linear.spike_eps < 1.0)) throw ConfigError("spike_eps must lie in (0, 1)");
        if (experiment != Experiment::dim_sweep && linear.spike_k > linear.d) throw ConfigError("spike_k exceeds d");
        if (experiment != Experiment::dim_sweep && n > linear.d)
            throw ConfigError("linear sweeps need n <= d so that XX^T is invertible");
        if (mc_n == 1) throw ConfigError("mc_n must be 0 or at least 2");
    }
    try {
        train.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
}

std::vector<std::string> preset_names() {
    return {"fig1_top", "fig1_bottom", "fig1_caption", "fig2", "fig2_caption", "fig3"};
}

SweepConfig preset_config(const std::string& name, Experiment experiment) {
    SweepConfig c;
    c.experiment = experiment;
    c.preset = name;
    c.train = sweep_training();
    const std::vector<double> scales{1e-3, 1e-2, 1e-1, 1.0};
    if (name == "fig1_top" || name == "fig1_bottom" || name == "fig1_caption") {
        if (name == "fig1_top" && experiment != Experiment::alpha_sweep)
            throw ConfigError("preset fig1_top is an alpha_sweep");
        if (name == "fig1_bottom" && experiment != Experiment::beta_sweep)
            throw ConfigError("preset fig1_bottom is a beta_sweep");
        if (experiment != Experiment::alpha_sweep && experiment != Experiment::beta_sweep)
            throw ConfigError("preset " + name + " needs alpha_sweep or beta_sweep");
        c.grid = scales;
        c.n = 100;
        c.mc_n = 2000;
        if (name == "fig1_caption") c.linear.width = 50;
    } else if (name == "fig3") {
        if (experiment != Experiment::dim_sweep) throw ConfigError("preset fig3 is a dim_sweep");
        c.grid = {250, 500, 1000, 2000};
        c.n = 100;
        c.mc_n = 2000;
        c.linear.alpha = 0.01;
        c.linear.beta = 1.0;
    } else if (name == "fig2" || name == "fig2_caption") {
        if (!is_relu(experiment)) throw ConfigError("preset " + name + " needs relu_alpha or relu_beta");
        c.grid = scales;
        c.n = 500;
        c.mc_n = 100'000;
        c.relu.teacher_width = name == "fig2" ? 10 : 50;
        c.train.max_steps = 6'000;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

SweepConfig apply_config_json(SweepConfig c, const json& j) {
    try {
        reject_unknown(j, {"experiment", "preset", "grid", "n", "runs", "mc_n", "jobs", "save_traces", "seed",
                           "linear", "relu", "train"},
                       "config");
        if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
        read(j, "preset", c.preset);
        read(j, "grid", c.grid);
        read(j, "n", c.n);
        read(j, "runs", c.runs);
        read(j, "mc_n", c.mc_n);
        read(j, "jobs", c.jobs);
        read(j, "save_traces", c.save_traces);
        read(j, "seed", c.master_seed);
        if (j.contains("linear")) {
            const auto& l = j.at("linear");
            reject_unknown(l, {"d", "q", "spike_k", "spike_eps", "noise", "depth", "width_factor", "width", "alpha",
                               "beta", "reduced_init"},
                           "linear");
            read(l, "d", c.linear.d);
            read(l, "q", c.linear.q);
            read(l, "spike_k", c.linear.spike_k);
            read(l, "spike_eps", c.linear.spike_eps);
            read(l, "noise", c.linear.noise);
            read(l, "depth", c.linear.depth);
            read(l, "width_factor", c.linear.width_factor);
            if (l.contains("width")) {
                if (l.at("width").is_null())
                    c.linear.width.reset();
                else
                    c.linear.width = l.at("width").get<std::size_t>();
            }
            read(l, "alpha", c.linear.alpha);
            read(l, "beta", c.linear.beta);
            read(l, "reduced_init", c.linear.reduced_init);
        }
        if (j.contains("relu")) {
            const auto& r = j.at("relu");
            reject_unknown(r, {"d", "q", "teacher_width", "student_width", "depth", "noise", "alpha", "beta", "step_growth"},
                           "relu");
            read(r, "d", c.relu.d);
            read(r, "q", c.relu.q);
            read(r, "teacher_width", c.relu.teacher_width);
            read(r, "student_width", c.relu.student_width);
            read(r, "depth", c.relu.depth);
            read(r, "noise", c.relu.noise);
            read(r, "alpha", c.relu.alpha);
            read(r, "beta", c.relu.beta);
            read(r, "step_growth", c.relu.step_growth);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t, {"mode", "step_size", "auto_step", "safety", "integrator", "dt", "adapt",
                               "local_tolerance", "loss_tolerance", "max_steps", "record_every", "norm_tolerance",
                               "norm_max_iterations"},
                           "train");
            std::string mode = std::holds_alternative<DescentMode>(c.train.mode) ? "descent" : "flow";
            read(t, "mode", mode);
            if (mode == "descent") {
                DescentMode d = std::holds_alternative<DescentMode>(c.train.mode) ? std::get<DescentMode>(c.train.mode)
                                                                                  : DescentMode{};
                read(t, "step_size", d.step_size);
                read(t, "auto_step", d.auto_step);
                read(t, "safety", d.safety);
                c.train.mode = d;
            } else if (mode == "flow") {
                FlowMode f = std::holds_alternative<FlowMode>(c.train.mode) ? std::get<FlowMode>(c.train.mode)
                                                                            : FlowMode{};
                if (t.contains("integrator")) {
                    const auto name = t.at("integrator").get<std::string>();
                    if (name == "euler")
                        f.integrator = FlowMode::Integrator::euler;
                    else if (name == "rk4")
                        f.integrator = FlowMode::Integrator::rk4;
                    else
                        throw ConfigError("unknown integrator '" + name + "'");
                }
                read(t, "dt", f.dt);
                read(t, "adapt", f.adapt);
                read(t, "local_tolerance", f.local_tolerance);
                c.train.mode = f;
            } else {
                throw ConfigError("train.mode must be 'descent' or 'flow'");
            }
            read(t, "loss_tolerance", c.train.loss_tolerance);
            read(t, "max_steps", c.train.max_steps);
            read(t, "record_every", c.train.record_every);
            read(t, "norm_tolerance", c.train.norm_options.tolerance);
            read(t, "norm_max_iterations", c.train.norm_options.max_iterations);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json config_to_json(const SweepConfig& c) {
    json train{{"loss_tolerance", c.train.loss_tolerance},
               {"max_steps", c.train.max_steps},
               {"record_every", c.train.record_every},
               {"norm_tolerance", c.train.norm_options.tolerance},
               {"norm_max_iterations", c.train.norm_options.max_iterations}};
    if (const auto* d = std::get_if<DescentMode>(&c.train.mode)) {
        train["mode"] = "descent";
        train["step_size"] = d->step_size;
        train["auto_step"] = d->auto_step;
        train["safety"] = d->safety;
    } else {
        const auto& f = std::get<FlowMode>(c.train.mode);
        train["mode"] = "flow";
        train["integrator"] = f.integrator == FlowMode::Integrator::rk4 ? "rk4" : "euler";
        train["dt"] = f.dt;
        train["adapt"] = f.adapt;
        train["local_tolerance"] = f.local_tolerance;
    }
    json linear{{"d", c.linear.d},
                {"q", c.linear.q},
                {"spike_k", c.linear.spike_k},
                {"spike_eps", c.linear.spike_eps},
                {"noise", c.linear.noise},
                {"depth", c.linear.depth},
                {"width_factor", c.linear.width_factor},
                {"width", c.linear.width ? json(*c.linear.width) : json(nullptr)},
                {"alpha", c.linear.alpha},
                {"beta", c.linear.beta},
                {"reduced_init", c.linear.reduced_init}};
    json relu{{"d", c.relu.d},
              {"q", c.relu.q},
              {"teacher_width", c.relu.teacher_width},
              {"student_width", c.relu.student_width},
              {"depth", c.relu.depth},
              {"noise", c.relu.noise},
              {"alpha", c.relu.alpha},
              {"beta", c.relu.beta},
              {"step_growth", c.relu.step_growth}};
    return {{"experiment", experiment_name(c.experiment)},
            {"preset", c.preset},
            {"grid", c.grid},
            {"n", c.n},
            {"runs", c.runs},
            {"mc_n", c.mc_n},
            {"seed", c.master_seed},
            {"save_traces", c.save_traces},
            {"linear", linear},
            {"relu", relu},
            {"train", train}};
}

}  // namespace benign::bench
