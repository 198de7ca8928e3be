#include "benign/bench/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "benign/csv.hpp"
#include "benign/datagen.hpp"
#include "benign/network.hpp"
#include "benign/risk.hpp"
#include "benign/trainer.hpp"

namespace benign::bench {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RunRecord blank_record(const SweepConfig& cfg, std::size_t gi, std::size_t run) {
    RunRecord rec;
    rec.grid_index = gi;
    rec.run = run;
    rec.grid_value = cfg.grid.at(gi);
    rec.seed = cell_seed(cfg.master_seed, gi, run);
    rec.excess_risk = rec.excess_risk_mc = rec.mc_half_width = kNaN;
    rec.dist_to_min_norm = rec.theta_perp_norm = kNaN;
    rec.bias_term = rec.variance_term = rec.cross_term = rec.xi_term = kNaN;
    rec.final_loss = rec.max_w1_drift_ratio = rec.growth_bound_min_slack = kNaN;
    return rec;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, std::size_t grid_index, std::size_t run) {
    return derive_seed(master, grid_index, run);
}

Stat summarize(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
                 values.end());
    Stat s;
    s.count = values.size();
    if (values.empty()) {
        s.mean = s.half_width = s.median = kNaN;
        return s;
    }
    CompensatedSum sum;
    for (double v : values) sum.add(v);
    const double n = static_cast<double>(values.size());
    s.mean = sum.value() / n;
    if (values.size() > 1) {
        CompensatedSum sq;
        for (double v : values) sq.add((v - s.mean) * (v - s.mean));
        s.half_width = 1.96 * std::sqrt(sq.value() / (n - 1)) / std::sqrt(n);
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    s.median = values.size() % 2 == 1 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
    return s;
}

std::size_t SweepResults::failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return !r.ok; }));
}

ResultSink::ResultSink(std::size_t total, std::function<void(const RunRecord&)> flush)
    : slots_(total), filled_(total, false), flush_(std::move(flush)) {}

void ResultSink::put(std::size_t slot, RunRecord rec) {
    std::lock_guard<std::mutex> lock(mu_);
    slots_.at(slot) = std::move(rec);
    filled_[slot] = true;
    while (next_ < slots_.size() && filled_[next_]) {
        if (flush_) flush_(slots_[next_]);
        ++next_;
    }
}

std::vector<RunRecord> ResultSink::take() {
    std::lock_guard<std::mutex> lock(mu_);
    if (next_ != slots_.size()) throw Error("ResultSink: results incomplete");
    return std::move(slots_);
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
    for (auto& th : pool) th.join();
}

RunRecord run_linear_cell(const SweepConfig& cfg, std::size_t gi, std::size_t run) {
    RunRecord rec = blank_record(cfg, gi, run);
    LinearParams p = cfg.linear;
    const double value = rec.grid_value;
    switch (cfg.experiment) {
        case Experiment::alpha_sweep: p.alpha = value; break;
        case Experiment::beta_sweep: p.beta = value; break;
        case Experiment::dim_sweep: p.d = static_cast<std::size_t>(value); break;
        default: throw ConfigError("run_linear_cell: not a linear experiment");
    }
    try {
        Rng rng(rec.seed);
        const auto task = make_task(spike_spectrum(std::min(p.spike_k, p.d), p.spike_eps, p.d), p.q, p.noise,
                                    false, rng);
        const auto ds = sample_dataset(task, cfg.n, rng());
        const RowSpace rows(ds.x);
        const std::size_t m = p.width_for(p.d);
        DeepLinearNetwork net = p.reduced_init ? init_random_reduced(p.alpha, p.beta, p.depth, m, p.d, p.q, rng)
                                               : init_random(p.alpha, p.beta, p.depth, m, p.d, p.q, rng);
        const double w1_norm = net.layers.front().norm();
        const TrainResult res = train(std::move(net), ds.x, ds.y, cfg.train, &rows);
        const TrainTrace& tr = res.trace;

        const double x_op = std::sqrt(rows.max_eigenvalue());
        const double lambda_max = tr.max_lambda_bound();
        rec.growth_bound_min_slack = std::numeric_limits<double>::infinity();
        double max_drift = 0.0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const double slack = theta_perp_growth_bound(tr, i, p.depth, x_op, lambda_max) - tr.theta_perp_norm[i];
            if (slack < 0.0) ++rec.growth_bound_violations;
            rec.growth_bound_min_slack = std::min(rec.growth_bound_min_slack, slack);
            max_drift = std::max(max_drift, tr.w1_nullspace_drift[i]);
        }
        rec.max_w1_drift_ratio =
            w1_norm > 0.0 ? max_drift / w1_norm : (max_drift == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());

        Rng mc_rng(derive_seed(rec.seed, 1));
        const Mat theta = end_to_end(res.net);
        const RiskReport rep = risk_report(theta, ds, task, cfg.mc_n, mc_rng, {}, &rows);
        rec.excess_risk = rep.exact_risk;
        if (rep.mc_samples > 0) {
            rec.excess_risk_mc = rep.mc_risk;
            rec.mc_half_width = rep.mc_half_width;
        }
        rec.dist_to_min_norm = rep.dist_to_min_norm;
        rec.theta_perp_norm = rep.theta_perp_norm;
        rec.bias_term = rep.bias_term;
        rec.variance_term = rep.variance_term;
        rec.cross_term = rep.cross_term;
        rec.xi_term = rep.xi_term;
        rec.final_loss = tr.losses.back();
        rec.steps = tr.steps_taken;
        rec.converged = tr.converged;
        rec.ok = true;
        if (cfg.save_traces) {
            const auto dir = cfg.output_dir / "traces";
            ensure_directory(dir);
            write_trace_csv(dir / ("g" + std::to_string(gi) + "_r" + std::to_string(run) + ".csv"), tr);
        }
    } catch (const DivergenceError& e) {
        rec.ok = false;
        rec.error = e.what();
        rec.final_loss = e.last_record().loss;
        rec.steps = e.last_record().step;
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

std::vector<PointSummary> summarize_points(const SweepConfig& cfg, const std::vector<RunRecord>& runs) {
    std::vector<PointSummary> out(cfg.grid.size());
    for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
        std::vector<double> risk, dist;
        PointSummary& p = out[gi];
        p.grid_index = gi;
        p.grid_value = cfg.grid[gi];
        for (const auto& r : runs) {
            if (r.grid_index != gi) continue;
            if (!r.ok) {
                ++p.failures;
                continue;
            }
            risk.push_back(r.excess_risk);
            dist.push_back(r.dist_to_min_norm);
        }
        p.excess_risk = summarize(std::move(risk));
        p.dist_to_min_norm = summarize(std::move(dist));
    }
    return out;
}

SweepResults run_sweep(const SweepConfig& cfg, const std::function<void(const RunRecord&)>& progress) {
    cfg.validate();
    if (cfg.experiment != Experiment::alpha_sweep && cfg.experiment != Experiment::beta_sweep &&
        cfg.experiment != Experiment::dim_sweep)
        throw ConfigError("run_sweep handles alpha_sweep, beta_sweep and dim_sweep");
    const std::size_t total = cfg.grid.size() * cfg.runs;
    ResultSink sink(total, progress);
    parallel_for(total, cfg.jobs, [&](std::size_t slot) {
        sink.put(slot, run_linear_cell(cfg, slot / cfg.runs, slot % cfg.runs));
    });
    SweepResults res;
    res.config = cfg;
    res.runs = sink.take();
    res.points = summarize_points(cfg, res.runs);
    return res;
}

}  // namespace benign::bench
