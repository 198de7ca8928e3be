#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "benign/bench/config.hpp"
#include "benign/bench/mlp.hpp"
#include "benign/bench/report.hpp"
#include "benign/bench/sweep.hpp"
#include "benign/bench/verify.hpp"
#include "test_util.hpp"

using namespace benign;
using namespace benign::bench;
using testutil::gaussian;

namespace {

SweepConfig tiny(Experiment e = Experiment::alpha_sweep) {
    SweepConfig cfg;
    cfg.experiment = e;
    cfg.grid = {0.01, 0.5};
    cfg.runs = 2;
    cfg.n = 8;
    cfg.mc_n = 500;
    cfg.linear.d = 20;
    cfg.linear.q = 2;
    cfg.linear.spike_k = 3;
    cfg.linear.spike_eps = 0.1;
    cfg.linear.width = 40;
    cfg.relu.d = 4;
    cfg.relu.student_width = 8;
    cfg.relu.teacher_width = 3;
    cfg.relu.q = 2;
    DescentMode m;
    m.auto_step = true;
    m.step_size = 1.0;
    cfg.train.mode = m;
    cfg.train.loss_tolerance = 1e-8;
    cfg.train.max_steps = 20'000;
    cfg.master_seed = 42;
    return cfg;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

int run_cli(const std::string& args) {
    const int status = std::system((std::string(BENCH_EXE) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("config validation") {
    auto cfg = tiny();
    CHECK_NOTHROW(cfg.validate());
    cfg.grid = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.grid = {0.5, 0.1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.runs = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny(Experiment::dim_sweep);
    cfg.grid = {10.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny(Experiment::relu_alpha);
    cfg.mc_n = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("presets") {
    CHECK(preset_names().size() == 6);
    const auto top = preset_config("fig1_top", Experiment::alpha_sweep);
    CHECK(top.n == 100);
    CHECK(top.runs == 20);
    CHECK(top.linear.d == 1000);
    CHECK(top.linear.width_for(1000) == 10'030);
    CHECK(top.linear.spike_k == 10);
    CHECK(top.linear.spike_eps == 0.01);
    CHECK(top.linear.beta == 1.0);
    const auto relu = preset_config("fig2", Experiment::relu_beta);
    CHECK(relu.relu.teacher_width == 10);
    CHECK(relu.relu.student_width == 50);
    CHECK(relu.n == 500);
    CHECK(relu.mc_n == 100'000);
    CHECK(preset_config("fig2_caption", Experiment::relu_alpha).relu.teacher_width == 50);
    CHECK(preset_config("fig1_caption", Experiment::beta_sweep).linear.width_for(1000) == 50);
    CHECK_THROWS_AS(preset_config("fig1_top", Experiment::beta_sweep), ConfigError);
    CHECK_THROWS_AS(preset_config("nope", Experiment::alpha_sweep), ConfigError);
}

TEST_CASE("JSON overlay") {
    const auto base = preset_config("fig1_top", Experiment::alpha_sweep);
    const auto j = nlohmann::json::parse(R"({"grid": [0.1, 1], "runs": 3,
        "linear": {"d": 200, "width": 64}, "train": {"mode": "flow", "integrator": "euler", "dt": 0.01}})");
    const auto cfg = apply_config_json(base, j);
    CHECK(cfg.grid == std::vector<double>{0.1, 1});
    CHECK(cfg.runs == 3);
    CHECK(cfg.linear.d == 200);
    CHECK(cfg.linear.width_for(200) == 64);
    const auto* flow = std::get_if<FlowMode>(&cfg.train.mode);
    REQUIRE(flow != nullptr);
    CHECK(flow->integrator == FlowMode::Integrator::euler);
    CHECK(flow->dt == 0.01);

    CHECK_THROWS_AS(apply_config_json(base, nlohmann::json::parse(R"({"gird": [1]})")), ConfigError);
    CHECK_THROWS_AS(apply_config_json(base, nlohmann::json::parse(R"({"linear": {"dd": 1}})")), ConfigError);
    CHECK_THROWS_AS(apply_config_json(base, nlohmann::json::parse(R"({"runs": "x"})")), ConfigError);

    const auto round = apply_config_json(SweepConfig{}, config_to_json(cfg));
    CHECK(config_to_json(round) == config_to_json(cfg));
}

TEST_CASE("confidence interval half width") {
    const std::vector<double> v{1, 2, 3, 4, 10};
    const Stat s = summarize(v);
    double mean = 4, ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    CHECK(s.mean == doctest::Approx(4));
    CHECK(s.median == 3);
    CHECK(s.count == 5);
    CHECK(s.half_width == doctest::Approx(1.96 * std::sqrt(ss / 4) / std::sqrt(5.0)).epsilon(1e-14));
    CHECK(summarize({1.0, NAN, 3.0}).count == 2);
    CHECK(std::isnan(summarize({}).mean));
}

TEST_CASE("ordered sink") {
    std::vector<std::size_t> seen;
    ResultSink sink(3, [&](const RunRecord& r) { seen.push_back(r.run); });
    RunRecord r;
    r.run = 2;
    sink.put(2, r);
    CHECK(seen.empty());
    r.run = 0;
    sink.put(0, r);
    CHECK(seen == std::vector<std::size_t>{0});
    r.run = 1;
    sink.put(1, r);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2});
    CHECK(sink.take().size() == 3);
}

TEST_CASE("linear sweep, report rows and determinism") {
    auto cfg = tiny();
    const auto res = run_sweep(cfg);
    REQUIRE(res.runs.size() == 4);
    CHECK(res.failures() == 0);
    for (const auto& r : res.runs) {
        CHECK(r.ok);
        CHECK(r.converged);
        CHECK(r.growth_bound_violations == 0);
        CHECK(std::abs(r.excess_risk - r.excess_risk_mc) <= 5 * r.mc_half_width);
        CHECK(r.max_w1_drift_ratio < 1e-10);
    }
    const std::string csv = results_csv(res);
    CHECK(count_lines(csv) == 1 + 4 + 2);

    cfg.jobs = 3;
    CHECK(results_csv(run_sweep(cfg)) == csv);

    const auto dir = testutil::scratch_dir("report");
    emit_report(res, dir);
    std::ifstream in(dir / "results.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == csv);
    const auto summary = nlohmann::json::parse(std::ifstream(dir / "summary.json"));
    CHECK(summary.at("schema_version") == kResultsSchemaVersion);
    CHECK(summary.at("columns").get<std::vector<std::string>>() == results_columns());
    CHECK(summary.at("points").size() == 2);
    CHECK(std::filesystem::exists(dir / "excess_risk.svg"));
    CHECK(std::filesystem::exists(dir / "dist_to_min_norm.svg"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("every csv row has the same number of fields") {
    const auto res = run_sweep(tiny());
    std::istringstream in(results_csv(res));
    std::string line;
    while (std::getline(in, line)) CHECK(std::count(line.begin(), line.end(), ',') + 1 == results_columns().size());
}

TEST_CASE("empty results are rejected and nothing is written") {
    SweepResults empty;
    empty.config = tiny();
    const auto dir = testutil::scratch_dir("empty");
    CHECK_THROWS_AS(emit_report(empty, dir), DomainError);
    CHECK_FALSE(std::filesystem::exists(dir));
}

TEST_CASE("divergent cells are recorded and the sweep continues") {
    auto cfg = tiny();
    cfg.train.mode = DescentMode{10.0, false, 0.5};
    const auto res = run_sweep(cfg);
    CHECK(res.runs.size() == 4);
    CHECK(res.failures() == 4);
    for (const auto& r : res.runs) CHECK_FALSE(r.error.empty());
}

TEST_CASE("relu forward") {
    Rng rng(1);
    const auto net = lecun_mlp({3, 5, 2}, rng);
    CHECK(relu_forward(net, Mat::Zero(4, 3)).norm() == 0.0);

    MlpNetwork pos = net;
    for (auto& w : pos.layers) w = w.cwiseAbs();
    const Mat x = gaussian(6, 3, rng).cwiseAbs();
    CHECK(testutil::rel_err(relu_forward(pos, x), x * pos.layers[0].transpose() * pos.layers[1].transpose()) < 1e-14);

    MlpNetwork one;
    one.layers = {Mat::Constant(1, 3, 0.4), Mat::Constant(2, 1, 1.5)};
    CHECK(relu_forward(one, -x).norm() == 0.0);

    MlpNetwork bad = net;
    bad.layers[1] = Mat::Ones(2, 4);
    CHECK_THROWS_AS(relu_forward(bad, x), ShapeError);
    CHECK_THROWS_AS(relu_forward(net, Mat::Ones(2, 4)), ShapeError);
}

TEST_CASE("mlp gradient matches finite differences") {
    Rng rng(2);
    auto net = scaled_identity_mlp(3, 6, 2, 3, 0.7, 0.9, rng);
    // identity middle layer feeds exact ReLU zeros forward; jitter it off the kinks
    net.layers[1] += gaussian(6, 6, rng, 0.1);
    const Mat x = gaussian(5, 3, rng), y = gaussian(5, 2, rng);
    const auto g = mlp_gradient(net, x, y);
    for (std::size_t j = 0; j < net.depth(); ++j)
        for (Eigen::Index i = 0; i < g.grads[j].size(); ++i) {
            const double h = 1e-6;
            auto up = net, down = net;
            up.layers[j].data()[i] += h;
            down.layers[j].data()[i] -= h;
            const double fd = ((relu_forward(up, x) - y).squaredNorm() - (relu_forward(down, x) - y).squaredNorm()) / (2 * h);
            CHECK(fd == doctest::Approx(g.grads[j].data()[i]).epsilon(1e-5).scale(1e-6));
        }
}

TEST_CASE("student equal to a noiseless teacher has zero risk") {
    Rng rng(3);
    const auto teacher = lecun_mlp({4, 5, 2}, rng);
    const Mat x = gaussian(20, 4, rng);
    const auto res = train_mlp(teacher, x, relu_forward(teacher, x), {});
    CHECK(res.converged);
    CHECK(res.steps == 0);
    const Mat test = gaussian(1000, 4, rng);
    CHECK((relu_forward(res.net, test) - relu_forward(teacher, test)).squaredNorm() == 0.0);
}

TEST_CASE("growing step never accepts a loss increase") {
    Rng rng(4);
    const auto teacher = lecun_mlp({4, 6, 2}, rng);
    const auto student = scaled_identity_mlp(4, 8, 2, 3, 1.0, 1.0, rng);
    const Mat x = gaussian(30, 4, rng);
    const Mat y = relu_forward(teacher, x) + gaussian(30, 2, rng);
    MlpTrainConfig cfg;
    cfg.growth = 1.5;
    double prev = INFINITY;
    for (std::size_t k = 0; k <= 60; ++k) {
        cfg.max_steps = k;
        const double loss = train_mlp(student, x, y, cfg).final_loss;
        CHECK(loss <= prev);
        prev = loss;
    }
    cfg.max_steps = 2000;
    MlpTrainConfig plain;
    plain.max_steps = 2000;
    CHECK(train_mlp(student, x, y, cfg).final_loss < train_mlp(student, x, y, plain).final_loss);
    cfg.growth = 0.5;
    CHECK_THROWS_AS(train_mlp(student, x, y, cfg), DomainError);
}

TEST_CASE("relu experiment is deterministic across job counts") {
    auto cfg = tiny(Experiment::relu_alpha);
    cfg.train.max_steps = 200;
    const auto a = run_relu_experiment(cfg);
    CHECK(a.failures() == 0);
    for (const auto& r : a.runs) {
        CHECK(r.excess_risk >= 0);
        CHECK(r.mc_half_width > 0);
        CHECK(std::isnan(r.dist_to_min_norm));
    }
    cfg.jobs = 2;
    CHECK(results_csv(run_relu_experiment(cfg)) == results_csv(a));
    CHECK_THROWS_AS(run_relu_experiment(tiny()), ConfigError);
}

TEST_CASE("verify suite") {
    const auto results = run_verify(5);
    REQUIRE(results.size() == invariant_checks().size());
    for (const auto& r : results) {
        CAPTURE(r.name);
        CAPTURE(r.detail);
        CHECK(r.passed);
    }
}

TEST_CASE("command line exit codes") {
    CHECK(run_cli("verify --seed 2") == 0);
    CHECK(run_cli("no_such_experiment") == 2);
    CHECK(run_cli("alpha_sweep --config /nonexistent/config.json") == 2);
    const auto dir = testutil::scratch_dir("cli");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "bad.json") << R"({"grid": [1, 0.5]})";
        std::ofstream(dir / "typo.json") << R"({"runz": 3})";
    }
    CHECK(run_cli("alpha_sweep --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()) == 2);
    CHECK(run_cli("alpha_sweep --config " + (dir / "typo.json").string()) == 2);
    CHECK(run_cli("alpha_sweep --runs 1") == 2);

    std::ofstream(dir / "small.json") << R"({"grid": [0.01, 0.1], "n": 6, "mc_n": 0,
        "linear": {"d": 15, "q": 1, "spike_k": 2, "spike_eps": 0.1, "width": 30},
        "train": {"step_size": 1.0, "loss_tolerance": 1e-8}})";
    CHECK(run_cli("alpha_sweep --config " + (dir / "small.json").string() + " --runs 2 --seed 4 --out " +
                  (dir / "o").string()) == 0);
    CHECK(std::filesystem::exists(dir / "o" / "results.csv"));
    std::filesystem::remove_all(dir);
}

}
