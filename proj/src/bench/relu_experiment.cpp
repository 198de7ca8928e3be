#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "benign/bench/mlp.hpp"
#include "benign/bench/sweep.hpp"
#include "benign/linalg.hpp"

namespace benign::bench {
namespace {

Mat standard_normal(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * normal(rng);
    return m;
}

RunRecord relu_cell(const SweepConfig& cfg, const MlpNetwork& teacher, std::size_t gi, std::size_t run) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    RunRecord rec;
    rec.grid_index = gi;
    rec.run = run;
    rec.grid_value = cfg.grid.at(gi);
    rec.seed = cell_seed(cfg.master_seed, gi, run);
    rec.dist_to_min_norm = rec.theta_perp_norm = rec.bias_term = rec.variance_term = nan;
    rec.cross_term = rec.xi_term = rec.max_w1_drift_ratio = rec.growth_bound_min_slack = nan;
    rec.excess_risk = rec.excess_risk_mc = rec.mc_half_width = rec.final_loss = nan;

    ReluParams p = cfg.relu;
    if (cfg.experiment == Experiment::relu_alpha)
        p.alpha = rec.grid_value;
    else
        p.beta = rec.grid_value;

    MlpTrainConfig tc;
    tc.loss_tolerance = cfg.train.loss_tolerance;
    tc.max_steps = cfg.train.max_steps;
    tc.refresh_every = cfg.train.record_every;
    tc.growth = cfg.relu.step_growth;
    if (const auto* d = std::get_if<DescentMode>(&cfg.train.mode)) tc.safety = d->safety;

    try {
        Rng rng(rec.seed);
        const Mat x = standard_normal(cfg.n, p.d, 1.0, rng);
        const Mat y = relu_forward(teacher, x) + standard_normal(cfg.n, p.q, p.noise, rng);
        MlpNetwork student = scaled_identity_mlp(p.d, p.student_width, p.q, p.depth, p.alpha, p.beta, rng);
        const MlpTrainResult res = train_mlp(std::move(student), x, y, tc);

        Rng test(derive_seed(rec.seed, 1));
        constexpr std::size_t batch = 10'000;
        CompensatedSum sum, sum_sq;
        for (std::size_t done = 0; done < cfg.mc_n; done += batch) {
            const std::size_t count = std::min(batch, cfg.mc_n - done);
            const Mat xt = standard_normal(count, p.d, 1.0, test);
            const Vec err = (relu_forward(res.net, xt) - relu_forward(teacher, xt)).rowwise().squaredNorm();
            for (Eigen::Index i = 0; i < err.size(); ++i) {
                sum.add(err(i));
                sum_sq.add(err(i) * err(i));
            }
        }
        const double n = static_cast<double>(cfg.mc_n);
        const double mean = sum.value() / n;
        const double var = std::max(0.0, (sum_sq.value() - n * mean * mean) / (n - 1));
        rec.excess_risk = rec.excess_risk_mc = mean;
        rec.mc_half_width = 1.96 * std::sqrt(var / n);
        rec.final_loss = res.final_loss;
        rec.steps = res.steps;
        rec.converged = res.converged;
        rec.ok = true;
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

}  // namespace

SweepResults run_relu_experiment(const SweepConfig& cfg, const std::function<void(const RunRecord&)>& progress) {
    cfg.validate();
    if (!is_relu(cfg.experiment)) throw ConfigError("run_relu_experiment handles relu_alpha and relu_beta");
    if (cfg.mc_n < 2) throw ConfigError("ReLU experiments need mc_n >= 2 test points");
    // One teacher per sweep, shared by every cell.
    Rng teacher_rng(derive_seed(cfg.master_seed, std::numeric_limits<std::uint64_t>::max()));
    const MlpNetwork teacher = lecun_mlp({cfg.relu.d, cfg.relu.teacher_width, cfg.relu.q}, teacher_rng);

    const std::size_t total = cfg.grid.size() * cfg.runs;
    ResultSink sink(total, progress);
    parallel_for(total, cfg.jobs, [&](std::size_t slot) {
        sink.put(slot, relu_cell(cfg, teacher, slot / cfg.runs, slot % cfg.runs));
    });
    SweepResults res;
    res.config = cfg;
    res.runs = sink.take();
    res.points = summarize_points(cfg, res.runs);
    return res;
}

}  // namespace benign::bench
