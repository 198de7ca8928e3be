#include "benign/bench/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "benign/bench/mlp.hpp"
#include "benign/bench/report.hpp"
#include "benign/bench/sweep.hpp"
#include "benign/datagen.hpp"
#include "benign/network.hpp"
#include "benign/risk.hpp"
#include "benign/spectrum.hpp"
#include "benign/trainer.hpp"

namespace benign::bench {
namespace {

template <class... Args>
std::string fmt(const Args&... args) {
    std::ostringstream os;
    os.precision(6);
    (os << ... << args);
    return os.str();
}

Mat gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal;
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

double rel(const Mat& a, const Mat& b) {
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

struct Small {
    RegressionTask task;
    Dataset ds;
};

Small small_problem(std::uint64_t seed, std::size_t d = 30, std::size_t n = 10, std::size_t q = 2) {
    Rng rng(seed);
    auto task = make_task(spike_spectrum(5, 0.1, d), q, 1.0, true, rng);
    auto ds = sample_dataset(task, n, rng());
    return {std::move(task), std::move(ds)};
}

TrainConfig flow_config(double dt, std::size_t steps) {
    TrainConfig cfg;
    FlowMode f;
    f.dt = dt;
    cfg.mode = f;
    cfg.max_steps = steps;
    cfg.loss_tolerance = 1e-12;
    cfg.record_every = 10;
    return cfg;
}

TrainConfig descent_config() {
    TrainConfig cfg;
    DescentMode m;
    m.auto_step = true;
    m.step_size = 1.0;
    cfg.mode = m;
    cfg.max_steps = 200'000;
    cfg.loss_tolerance = 1e-10;
    cfg.record_every = 20;
    return cfg;
}

// ---- spectrum ----------------------------------------------------------------

std::string tail_sum_monotone(std::uint64_t seed) {
    Rng rng(seed);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> v(40);
    for (auto& e : v) e = ex(rng);
    std::sort(v.rbegin(), v.rend());
    const CovarianceSpectrum spec(v);
    for (std::size_t j = 0; j < spec.dim(); ++j)
        if (tail_sum(spec, j + 1) > tail_sum(spec, j)) return fmt("s_", j + 1, " > s_", j);
    return {};
}

std::string spike_rank_jump(std::uint64_t) {
    for (std::size_t k : {1, 3, 10})
        for (double eps : {0.01, 0.3}) {
            const std::size_t d = 200;
            const auto spec = spike_spectrum(k, eps, d);
            for (std::size_t j = 0; j < k; ++j)
                if (effective_ranks(spec, j).r > k + eps * d + 1e-9)
                    return fmt("r_", j, " exceeds k + eps d for k=", k, " eps=", eps);
            const double rk = effective_ranks(spec, k).r;
            if (std::abs(rk - static_cast<double>(d - k)) > 1e-9 * d) return fmt("r_k = ", rk, " != d - k");
        }
    return {};
}

std::string flat_spectrum_ranks(std::uint64_t) {
    const std::size_t d = 25;
    const CovarianceSpectrum spec(std::vector<double>(d, 0.7));
    for (std::size_t j = 0; j < d; ++j) {
        const auto s = effective_ranks(spec, j);
        const double want = static_cast<double>(d - j);
        if (std::abs(s.r - want) > 1e-12 * want || std::abs(s.big_r - want) > 1e-12 * want)
            return fmt("r_", j, " = ", s.r, ", R_", j, " = ", s.big_r, ", want ", want);
    }
    return {};
}

std::string critical_index_monotone(std::uint64_t seed) {
    Rng rng(seed);
    std::exponential_distribution<double> ex(0.5);
    std::vector<double> v(300);
    for (auto& e : v) e = ex(rng) * ex(rng);
    std::sort(v.rbegin(), v.rend());
    const CovarianceSpectrum spec(v);
    auto key = [](std::optional<std::size_t> k) { return k ? *k : std::numeric_limits<std::size_t>::max(); };
    for (double b : {0.1, 0.5, 1.0})
        for (std::size_t n = 1; n < 120; ++n) {
            if (key(critical_index(spec, b, n + 1)) < key(critical_index(spec, b, n))) return fmt("decreasing in n at ", n);
            if (key(critical_index(spec, 2 * b, n)) < key(critical_index(spec, b, n))) return fmt("decreasing in b at ", b);
        }
    return {};
}

// ---- datagen -----------------------------------------------------------------

std::string reconstructibility(std::uint64_t seed) {
    const auto p = small_problem(seed);
    const Mat again = p.ds.x * p.task.theta_star + p.ds.omega;
    if (again != p.ds.y) return "Y differs from X Theta* + Omega";
    const double resid = (p.ds.y - p.ds.x * p.task.theta_star - p.ds.omega).cwiseAbs().maxCoeff();
    const double ulp = 8 * std::numeric_limits<double>::epsilon() * std::max(1.0, p.ds.y.cwiseAbs().maxCoeff());
    if (resid > ulp) return fmt("residual ", resid);
    return {};
}

std::string seed_determinism(std::uint64_t seed) {
    const auto p = small_problem(seed);
    const auto again = sample_dataset(p.task, p.ds.n(), p.ds.seed);
    if (again.x != p.ds.x || again.y != p.ds.y || again.omega != p.ds.omega) return "resampled dataset differs";
    return {};
}

std::string second_moment(std::uint64_t seed) {
    Rng rng(seed);
    const auto task = make_task(CovarianceSpectrum({3.0, 2.0, 1.0, 0.5, 0.1, 0.05}), 1, 1.0, true, rng);
    const Mat x = sample_covariates(task, 100'000, rng);
    const Mat emp = x.transpose() * x / static_cast<double>(x.rows());
    const double err = rel(emp, task.covariance());
    if (err >= 0.05) return fmt("relative error ", err);
    return {};
}

// ---- network -----------------------------------------------------------------

std::string perturbation_linearity(std::uint64_t seed) {
    Rng rng(seed);
    DeepLinearNetwork net = init_random(0.7, 0.7, 3, 6, 4, 2, rng);
    net.layers[1] += 0.1 * gaussian(6, 6, rng);
    const Mat dir = Vec::Unit(36, 14).reshaped(6, 6);
    const Mat analytic = (net.layers[2] * dir * net.layers[0]).transpose();
    const double h = 1e-5;
    DeepLinearNetwork up = net, down = net;
    up.layers[1] += h * dir;
    down.layers[1] -= h * dir;
    const Mat fd = (end_to_end(up) - end_to_end(down)) / (2 * h);
    if (rel(fd, analytic) > 1e-8) return fmt("finite difference mismatch ", rel(fd, analytic));
    const double bound = h * operator_norm(net.layers[0]) * operator_norm(net.layers[2]) * dir.norm();
    if ((end_to_end(up) - end_to_end(net)).norm() > bound * (1 + 1e-9)) return "change exceeds outer norm product";
    return {};
}

std::string init_deterministic(std::uint64_t seed) {
    Rng a(seed), b(seed);
    const auto na = init_random(0.3, 0.5, 4, 12, 5, 2, a);
    const auto nb = init_random(0.3, 0.5, 4, 12, 5, 2, b);
    for (std::size_t j = 0; j < na.depth(); ++j)
        if (na.layers[j] != nb.layers[j]) return fmt("layer ", j + 1, " differs");
    return {};
}

std::string subset_product_bounds(std::uint64_t seed) {
    Rng rng(seed);
    for (double scale : {0.01, 0.5, 3.0}) {
        const auto net = init_random(scale, scale, 3, 8, 5, 2, rng);
        const auto norms = layer_op_norms(net);
        const double prod = max_subset_opnorm_product(net);
        if (prod < 1.0) return fmt("product ", prod, " < 1");
        for (double n : norms)
            if (prod < n * (1 - 1e-9)) return fmt("product ", prod, " below a layer norm ", n);
    }
    return {};
}

// ---- trainer -----------------------------------------------------------------

std::string gradient_finite_difference(std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 5), depth(2, 4), count(1, 4);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t L = depth(rng), d = dim(rng), q = dim(rng), m = dim(rng), n = count(rng);
        auto fill = [&](Eigen::Index r, Eigen::Index c) {
            Mat w(r, c);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit(rng);
            return w;
        };
        DeepLinearNetwork net;
        for (std::size_t j = 0; j < L; ++j)
            net.layers.push_back(fill(j + 1 == L ? q : m, j == 0 ? d : m));
        const Mat x = fill(n, d), y = fill(n, q);
        const auto grads = layer_gradients(net, x, y);
        for (std::size_t j = 0; j < L; ++j) {
            Mat fd(grads[j].rows(), grads[j].cols());
            for (Eigen::Index i = 0; i < fd.size(); ++i) {
                const double h = 1e-6;
                DeepLinearNetwork up = net, down = net;
                up.layers[j].data()[i] += h;
                down.layers[j].data()[i] -= h;
                fd.data()[i] = (loss(up, x, y) - loss(down, x, y)) / (2 * h);
            }
            const double err = (fd - grads[j]).norm() / std::max(grads[j].norm(), 1e-8);
            if (err >= 1e-5) return fmt("layer ", j + 1, " of L=", L, ": relative error ", err);
        }
    }
    return {};
}

std::string flow_loss_monotone(std::uint64_t seed) {
    const auto p = small_problem(seed);
    Rng rng(seed + 1);
    const double beta = 1.0;
    const auto net = init_random(0.1, beta, 3, 60, p.task.d(), p.task.q(), rng);
    const double x_op = operator_norm(p.ds.x);
    const auto res = train(net, p.ds.x, p.ds.y, flow_config(1e-3 / (beta * beta * x_op * x_op), 3000));
    const auto& l = res.trace.losses;
    for (std::size_t i = 1; i < l.size(); ++i)
        if (!(l[i] < l[i - 1]) && l[i] > 0) return fmt("loss rose at record ", i, ": ", l[i - 1], " -> ", l[i]);
    return {};
}

std::string null_space_freeze(std::uint64_t seed) {
    const auto p = small_problem(seed);
    Rng rng(seed + 2);
    const auto net = init_random(0.5, 1.0, 3, 60, p.task.d(), p.task.q(), rng);
    const double w1 = net.layers.front().norm();
    const double x_op = operator_norm(p.ds.x);
    const auto flow = train(net, p.ds.x, p.ds.y, flow_config(1e-3 / (x_op * x_op), 2000));
    const double flow_drift = *std::max_element(flow.trace.w1_nullspace_drift.begin(), flow.trace.w1_nullspace_drift.end());
    if (flow_drift >= 1e-8 * w1) return fmt("flow drift ", flow_drift, " vs ||W_1|| ", w1);
    const auto gd = train(net, p.ds.x, p.ds.y, descent_config());
    const double gd_drift = *std::max_element(gd.trace.w1_nullspace_drift.begin(), gd.trace.w1_nullspace_drift.end());
    if (gd_drift >= 1e-10 * w1) return fmt("descent drift ", gd_drift, " vs ||W_1|| ", w1);
    return {};
}

std::string projection_identity(std::uint64_t seed) {
    const auto p = small_problem(seed);
    Rng rng(seed + 3);
    const auto net = init_random(0.5, 1.0, 3, 60, p.task.d(), p.task.q(), rng);
    const auto res = train(net, p.ds.x, p.ds.y, descent_config());
    if (!res.trace.converged) return "training did not converge";
    const RowSpace rows(p.ds.x);
    const Mat theta = end_to_end(res.net);
    const double gap = (rows.project(theta) - min_norm_interpolant(rows, p.ds.y)).norm();
    const double tol = std::sqrt(res.trace.losses.back() / rows.min_eigenvalue()) * (1 + 1e-8) + 1e-13;
    if (gap > tol) return fmt("||P_X Theta - Theta_l2|| = ", gap, " > ", tol);
    return {};
}

std::string growth_bound(std::uint64_t seed) {
    const auto p = small_problem(seed);
    Rng rng(seed + 4);
    const auto net = init_random(0.5, 1.0, 3, 60, p.task.d(), p.task.q(), rng);
    const auto res = train(net, p.ds.x, p.ds.y, descent_config());
    const auto& tr = res.trace;
    const double x_op = operator_norm(p.ds.x);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double bound = theta_perp_growth_bound(tr, i, 3, x_op, tr.max_lambda_bound());
        if (tr.theta_perp_norm[i] > bound) return fmt("record ", i, ": ", tr.theta_perp_norm[i], " > ", bound);
    }
    return {};
}

std::string loss_envelope_check(std::uint64_t seed) {
    const auto p = small_problem(seed, 20, 8, 2);
    const auto th = decay_threshold(p.ds.x, p.ds.y, 3, 0.1, 0.1);
    const double beta = 1.5 * th.beta_min;
    Rng rng(seed + 5);
    const auto net = init_random(0.1, beta, 3, 100, p.task.d(), p.task.q(), rng);
    const double x_op = operator_norm(p.ds.x);
    const double sigma = sigma_min_wide(p.ds.x);
    const auto res = train(net, p.ds.x, p.ds.y, flow_config(1e-3 / (beta * beta * x_op * x_op), 3000));
    const auto& tr = res.trace;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double env = loss_envelope(tr.losses[0], beta, sigma, tr.times[i]);
        if (tr.losses[i] > env * (1 + 1e-12)) return fmt("record ", i, ": loss ", tr.losses[i], " > envelope ", env);
    }
    return {};
}

// ---- risk --------------------------------------------------------------------

std::string projector_algebra(std::uint64_t seed) {
    const auto p = small_problem(seed);
    const Mat proj = row_span_projector(p.ds.x);
    const Mat xt = p.ds.x.transpose();
    if (rel(proj * proj, proj) > 1e-10) return "P_X^2 != P_X";
    if (rel(proj * xt, xt) > 1e-10) return "P_X X^T != X^T";
    const Mat out = xt - proj * xt;
    if (out.norm() > 1e-10 * xt.norm()) return "(I - P_X) X^T != 0";
    return {};
}

std::string minimality(std::uint64_t seed) {
    const auto p = small_problem(seed);
    Rng rng(seed + 6);
    std::normal_distribution<double> normal;
    const RowSpace rows(p.ds.x);
    const Mat theta = min_norm_interpolant(rows, p.ds.y);
    for (int t = 0; t < 100; ++t) {
        Mat g(theta.rows(), theta.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
        if (t % 10 == 0) g = rows.project(g);  // perturbation inside the span
        const Mat out = rows.project_out(g);
        const double base = theta.norm(), moved = (theta + out).norm();
        if (moved < base * (1 - 1e-12)) return fmt("perturbed norm ", moved, " < ", base);
        const bool zero = out.norm() <= 1e-10 * g.norm();
        if (zero != (std::abs(moved - base) <= 1e-10 * base)) return "equality without zero perturbation";
    }
    return {};
}

std::string exact_risk_matches_mc(std::uint64_t seed) {
    Rng rng(seed);
    const auto task = make_task(spike_spectrum(3, 0.2, 10), 2, 1.0, true, rng);
    std::normal_distribution<double> normal;
    int inside = 0;
    for (int t = 0; t < 100; ++t) {
        Mat theta = task.theta_star;
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] += 0.3 * normal(rng);
        const double exact = exact_excess_risk(theta, task);
        const auto mc = mc_excess_risk(theta, task, 10'000, rng);
        if (std::abs(exact - mc.mean) <= mc.half_width) ++inside;
    }
    // A calibrated 95% interval covers at least 90 of 100 trials except with
    // probability about 1%.
    if (inside < 90) return fmt("only ", inside, " of 100 intervals cover the exact risk");
    return {};
}

std::string variance_invariance(std::uint64_t seed) {
    const auto p = small_problem(seed);
    const RowSpace rows(p.ds.x);
    Rng rng(seed + 7);
    const auto net = init_random(0.5, 1.0, 3, 60, p.task.d(), p.task.q(), rng);
    const auto res = train(net, p.ds.x, p.ds.y, descent_config());
    Rng r1(1), r2(1);
    const auto trained = risk_report(end_to_end(res.net), p.ds, p.task, 0, r1, {}, &rows);
    const auto minimum = risk_report(min_norm_interpolant(rows, p.ds.y), p.ds, p.task, 0, r2, {}, &rows);
    if (trained.variance_term != minimum.variance_term)
        return fmt("variance ", trained.variance_term, " vs ", minimum.variance_term);
    const auto bv = bias_variance_matrices(p.ds.x, p.task.covariance());
    const double direct = (p.ds.omega.transpose() * bv.c * p.ds.omega).trace();
    if (std::abs(direct - minimum.variance_term) > 1e-10 * direct) return "Tr(Omega^T C Omega) mismatch";
    return {};
}

std::string decomposition_consistency(std::uint64_t seed) {
    const auto p = small_problem(seed);
    const RowSpace rows(p.ds.x);
    Rng rng(seed + 8);
    std::normal_distribution<double> normal;
    Mat g(p.task.d(), p.task.q());
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const Mat theta = min_norm_interpolant(rows, p.ds.y) + rows.project_out(g);
    const auto rep = risk_report(theta, p.ds, p.task, 0, rng, {}, &rows);
    const auto bv = bias_variance_matrices(p.ds.x, p.task.covariance());
    const Mat e = p.task.theta_star - rows.project_out(theta);
    const Mat f = rows.lift(p.ds.omega);
    const double bias = (e.transpose() * bv.b * e).trace();
    const double var = (p.ds.omega.transpose() * bv.c * p.ds.omega).trace();
    const double cross = -(rows.project_out(e).transpose() * p.task.covariance() * f).trace();
    const double sum = bias + var + 2 * cross;
    if (std::abs(sum - rep.exact_risk) > 1e-9 * rep.exact_risk) return fmt("decomposition ", sum, " vs ", rep.exact_risk);
    return {};
}

// ---- bench -------------------------------------------------------------------

SweepConfig tiny_sweep(std::uint64_t seed) {
    SweepConfig cfg;
    cfg.experiment = Experiment::alpha_sweep;
    cfg.grid = {0.01, 0.3};
    cfg.n = 8;
    cfg.runs = 3;
    cfg.linear.d = 20;
    cfg.linear.q = 2;
    cfg.linear.spike_k = 3;
    cfg.linear.spike_eps = 0.1;
    cfg.linear.width = 60;
    cfg.train = descent_config();
    cfg.master_seed = seed;
    return cfg;
}

std::string sweep_determinism(std::uint64_t seed) {
    SweepConfig cfg = tiny_sweep(seed);
    const std::string serial = results_csv(run_sweep(cfg));
    cfg.jobs = 4;
    if (results_csv(run_sweep(cfg)) != serial) return "results.csv depends on the number of jobs";
    return {};
}

std::string ci_half_width(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(2.0, 3.0);
    std::vector<double> v(20);
    for (auto& x : v) x = normal(rng);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= 20;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double want = 1.96 * std::sqrt(ss / 19) / std::sqrt(20.0);
    const Stat s = summarize(v);
    if (std::abs(s.half_width - want) > 1e-12 * want) return fmt("half width ", s.half_width, " vs ", want);
    return {};
}

std::string relu_properties(std::uint64_t seed) {
    Rng rng(seed);
    MlpNetwork net = lecun_mlp({4, 6, 2}, rng);
    if (relu_forward(net, Mat::Zero(3, 4)).norm() != 0.0) return "f(0) != 0";
    MlpNetwork pos = net;
    for (auto& w : pos.layers) w = w.cwiseAbs();
    const Mat x = gaussian(5, 4, rng).cwiseAbs();
    const Mat lin = x * pos.layers[0].transpose() * pos.layers[1].transpose();
    if (rel(relu_forward(pos, x), lin) > 1e-14) return "non-negative network is not linear";
    MlpNetwork one;
    one.layers = {Mat::Constant(1, 4, 0.5), Mat::Constant(2, 1, 2.0)};
    if (relu_forward(one, -x).norm() != 0.0) return "negated input not killed";
    return {};
}

}  // namespace

const std::vector<NamedCheck>& invariant_checks() {
    static const std::vector<NamedCheck> checks = {
        {"spectrum.tail_sum_non_increasing", tail_sum_monotone},
        {"spectrum.spike_rank_jump", spike_rank_jump},
        {"spectrum.flat_spectrum_ranks", flat_spectrum_ranks},
        {"spectrum.critical_index_monotone", critical_index_monotone},
        {"datagen.reconstructibility", reconstructibility},
        {"datagen.seed_determinism", seed_determinism},
        {"datagen.second_moment", second_moment},
        {"network.perturbation_linearity", perturbation_linearity},
        {"network.init_deterministic", init_deterministic},
        {"network.subset_product_bounds", subset_product_bounds},
        {"trainer.gradient_finite_difference", gradient_finite_difference},
        {"trainer.flow_loss_monotone", flow_loss_monotone},
        {"trainer.null_space_freeze", null_space_freeze},
        {"trainer.projection_identity", projection_identity},
        {"trainer.theta_perp_growth_bound", growth_bound},
        {"trainer.loss_decay_envelope", loss_envelope_check},
        {"risk.projector_algebra", projector_algebra},
        {"risk.minimality", minimality},
        {"risk.exact_matches_monte_carlo", exact_risk_matches_mc},
        {"risk.variance_invariance", variance_invariance},
        {"risk.decomposition_consistency", decomposition_consistency},
        {"bench.sweep_determinism", sweep_determinism},
        {"bench.ci_half_width", ci_half_width},
        {"bench.relu_forward", relu_properties},
    };
    return checks;
}

std::vector<CheckResult> run_verify(std::uint64_t seed, const std::function<void(const CheckResult&)>& progress) {
    std::vector<CheckResult> out;
    for (std::size_t i = 0; i < invariant_checks().size(); ++i) {
        const auto& c = invariant_checks()[i];
        CheckResult r{c.name, false, {}};
        try {
            r.detail = c.run(derive_seed(seed, i));
            r.passed = r.detail.empty();
        } catch (const std::exception& e) {
            r.detail = std::string("exception: ") + e.what();
        }
        out.push_back(r);
        if (progress) progress(r);
        if (!r.passed) break;
    }
    return out;
}

}  // namespace benign::bench
