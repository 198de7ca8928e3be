#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "benign/bench/config.hpp"

namespace benign::bench {

/// One (grid point, run) cell. Metrics that do not apply are NaN.
struct RunRecord {
    std::size_t grid_index = 0;
    std::size_t run = 0;
    double grid_value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;

    double excess_risk = 0.0;     // exact trace formula (linear) or MC (ReLU)
    double excess_risk_mc = 0.0;  // Monte-Carlo estimate
    double mc_half_width = 0.0;
    double dist_to_min_norm = 0.0;
    double theta_perp_norm = 0.0;
    double bias_term = 0.0;
    double variance_term = 0.0;
    double cross_term = 0.0;
    double xi_term = 0.0;
    double final_loss = 0.0;
    std::size_t steps = 0;
    bool converged = false;
    double max_w1_drift_ratio = 0.0;       // max recorded drift / ||W_1(0)||
    std::size_t growth_bound_violations = 0;
    double growth_bound_min_slack = 0.0;   // min over records of bound - measured
};

/// Mean, 95% Gaussian half-width 1.96 s / sqrt(count), median.
struct Stat {
    double mean = 0.0;
    double half_width = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};
Stat summarize(std::vector<double> values);

struct PointSummary {
    std::size_t grid_index = 0;
    double grid_value = 0.0;
    std::size_t failures = 0;
    Stat excess_risk;
    Stat dist_to_min_norm;
};

struct SweepResults {
    SweepConfig config;
    std::vector<RunRecord> runs;  // ordered by (grid index, run)
    std::vector<PointSummary> points;

    std::size_t failures() const;
};

/// Collects records completed in any order and hands them to `flush` in
/// (grid index, run) order as soon as the prefix is complete.
class ResultSink {
public:
    ResultSink(std::size_t total, std::function<void(const RunRecord&)> flush);
    void put(std::size_t slot, RunRecord rec);
    std::vector<RunRecord> take();

private:
    std::mutex mu_;
    std::vector<RunRecord> slots_;
    std::vector<bool> filled_;
    std::size_t next_ = 0;
    std::function<void(const RunRecord&)> flush_;
};

/// Runs `count` independent tasks on `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

/// Per-grid-point statistics over the successful runs.
std::vector<PointSummary> summarize_points(const SweepConfig& cfg, const std::vector<RunRecord>& runs);

/// One linear cell: fresh Theta*, dataset, init, training, risk.
RunRecord run_linear_cell(const SweepConfig& cfg, std::size_t grid_index, std::size_t run);

/// Linear sweeps (alpha, beta, dim). Divergent cells are recorded with
/// ok = false and the sweep continues.
SweepResults run_sweep(const SweepConfig& cfg,
                       const std::function<void(const RunRecord&)>& progress = {});

/// ReLU students against one fixed teacher drawn from the master seed.
SweepResults run_relu_experiment(const SweepConfig& cfg,
                                 const std::function<void(const RunRecord&)>& progress = {});

/// Per-run seed from (master seed, grid index, run index).
std::uint64_t cell_seed(std::uint64_t master, std::size_t grid_index, std::size_t run);

}  // namespace benign::bench
