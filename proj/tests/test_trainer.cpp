#include <doctest.h>

#include <cmath>
#include <fstream>

#include "benign/datagen.hpp"
#include "benign/linalg.hpp"
#include "benign/network.hpp"
#include "benign/risk.hpp"
#include "benign/trainer.hpp"
#include "test_util.hpp"

using namespace benign;
using testutil::gaussian;
using testutil::rel_err;

namespace {

DeepLinearNetwork scalar_net(double w1, double w2) {
    DeepLinearNetwork net;
    net.layers = {Mat::Constant(1, 1, w1), Mat::Constant(1, 1, w2)};
    return net;
}

const Mat kOne = Mat::Constant(1, 1, 1.0);

DeepLinearNetwork random_net(std::size_t L, std::size_t m, std::size_t d, std::size_t q, Rng& rng) {
    std::uniform_real_distribution<double> unit(-1, 1);
    DeepLinearNetwork net;
    for (std::size_t j = 0; j < L; ++j) {
        Mat w(j + 1 == L ? q : m, j == 0 ? d : m);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit(rng);
        net.layers.push_back(w);
    }
    return net;
}

Mat finite_difference(const DeepLinearNetwork& net, const Mat& x, const Mat& y, std::size_t j, double h) {
    Mat g(net.layers[j].rows(), net.layers[j].cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        auto up = net, down = net;
        up.layers[j].data()[i] += h;
        down.layers[j].data()[i] -= h;
        g.data()[i] = (loss(up, x, y) - loss(down, x, y)) / (2 * h);
    }
    return g;
}

struct Problem {
    RegressionTask task;
    Dataset ds;
};

Problem problem(std::uint64_t seed, std::size_t d, std::size_t n, std::size_t q) {
    Rng rng(seed);
    auto task = make_task(spike_spectrum(3, 0.1, d), q, 1.0, false, rng);
    auto ds = sample_dataset(task, n, rng());
    return {std::move(task), std::move(ds)};
}

TrainConfig auto_descent(double tol = 1e-10) {
    TrainConfig cfg;
    DescentMode m;
    m.auto_step = true;
    m.step_size = 1.0;
    cfg.mode = m;
    cfg.loss_tolerance = tol;
    cfg.max_steps = 500'000;
    cfg.record_every = 25;
    return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("scalar loss and gradients") {
    const auto net = scalar_net(2, 3);
    CHECK(loss(net, kOne, kOne) == 25.0);
    // d/dw1 (1 - w1 w2)^2 = -2 w2 (1 - w1 w2) = 30
    CHECK(layer_gradient(net, kOne, kOne, 1)(0, 0) == doctest::Approx(30.0));
    CHECK(layer_gradient(net, kOne, kOne, 2)(0, 0) == doctest::Approx(20.0));
    CHECK_THROWS_AS(layer_gradient(net, kOne, kOne, 0), DomainError);
    CHECK_THROWS_AS(layer_gradient(net, kOne, kOne, 3), DomainError);

    const auto stepped = step_descent(net, kOne, kOne, 0.01);
    CHECK(stepped.layers[0](0, 0) == doctest::Approx(1.7));
    CHECK(stepped.layers[1](0, 0) == doctest::Approx(2.8));
    const auto same = step_descent(net, kOne, kOne, 0.0);
    CHECK(same.layers[0] == net.layers[0]);
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(1);
    const auto net = random_net(3, 4, 3, 2, rng);
    const Mat x = gaussian(2, 3, rng), y = gaussian(2, 2, rng);
    for (std::size_t j = 1; j <= 3; ++j) {
        const Mat g = layer_gradient(net, x, y, j);
        CHECK(rel_err(finite_difference(net, x, y, j - 1, 1e-5), g) < 1e-6);
    }
    const auto all = layer_gradients(net, x, y);
    for (std::size_t j = 0; j < 3; ++j) CHECK(rel_err(all[j], layer_gradient(net, x, y, j + 1)) < 1e-14);
}

TEST_CASE("gradients vanish at an interpolating point") {
    Rng rng(2);
    const Mat x = gaussian(3, 6, rng), y = gaussian(3, 2, rng);
    const Mat theta = min_norm_interpolant(x, y);
    DeepLinearNetwork net;
    net.layers = {theta.transpose(), Mat::Identity(2, 2)};
    CHECK(loss(net, x, y) <= 1e-20 * y.squaredNorm());
    for (const auto& g : layer_gradients(net, x, y)) CHECK(g.norm() < 1e-10);
    CHECK(dtheta_dt(net, x, y).norm() < 1e-10);
    const auto same = step_descent(net, x, y, 0.1);
    CHECK(rel_err(same.layers[0], net.layers[0]) < 1e-12);
}

TEST_CASE("modified identity loss equals ||Y||^2") {
    Rng rng(3);
    const Mat x = gaussian(4, 5, rng), y = gaussian(4, 2, rng);
    CHECK(loss(init_modified_identity(3, 5, 2), x, y) == doctest::Approx(y.squaredNorm()).epsilon(1e-15));
}

TEST_CASE("closed-form dtheta/dt") {
    // L = 2 scalars: -2 (w2^2 + w1^2) x (x theta - y)
    const double w1 = 0.7, w2 = -1.3, xv = 1.5, yv = 0.4;
    const Mat x = Mat::Constant(1, 1, xv), y = Mat::Constant(1, 1, yv);
    const double want = -2 * (w2 * w2 + w1 * w1) * xv * (xv * w1 * w2 - yv);
    CHECK(dtheta_dt(scalar_net(w1, w2), x, y)(0, 0) == doctest::Approx(want).epsilon(1e-14));

    // Product rule over layer gradients.
    Rng rng(4);
    for (std::size_t L : {2, 3, 4}) {
        const auto net = random_net(L, 4, 3, 2, rng);
        const Mat xs = gaussian(3, 3, rng), ys = gaussian(3, 2, rng);
        const auto g = layer_gradients(net, xs, ys);
        Mat dt = Mat::Zero(2, 3);  // d(W_L..W_1)/dt
        for (std::size_t j = 0; j < L; ++j) {
            Mat above = Mat::Identity(2, 2), below = Mat::Identity(3, 3);
            for (std::size_t k = L; k-- > j + 1;) above = above * net.layers[k];
            for (std::size_t k = 0; k < j; ++k) below = net.layers[k] * below;
            dt -= above * g[j] * below;
        }
        CHECK(rel_err(dtheta_dt(net, xs, ys), dt.transpose()) < 1e-10);
    }
}

TEST_CASE("RK4 against Euler and a refined oracle") {
    const auto net = scalar_net(0.5, 0.8);
    const Mat x = Mat::Constant(1, 1, 1.0), y = Mat::Constant(1, 1, 2.0);
    const double dt = 1e-3;
    const auto e = step_flow_euler(net, x, y, dt), r = step_flow_rk4(net, x, y, dt);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(e.layers[j](0, 0) - r.layers[j](0, 0)) < 50 * dt * dt);
    const auto zero = step_flow_rk4(net, x, y, 0.0);
    CHECK(zero.layers[0] == net.layers[0]);

    // Fine Euler oracle over T = 0.2.
    auto oracle = net;
    const double T = 0.2;
    for (int i = 0; i < 200'000; ++i) oracle = step_flow_euler(oracle, x, y, T / 200'000);
    auto run = [&](double h) {
        auto n = net;
        for (int i = 0; i < static_cast<int>(std::lround(T / h)); ++i) n = step_flow_rk4(n, x, y, h);
        return n;
    };
    const auto coarse = run(0.05);
    CHECK(std::abs(coarse.layers[0](0, 0) - oracle.layers[0](0, 0)) < 1e-4);

    // Fourth order: halving h shrinks the error by about 16 (against a fine RK4 reference).
    const auto ref = run(T / 4000);
    const double e1 = std::abs(run(0.05).layers[1](0, 0) - ref.layers[1](0, 0));
    const double e2 = std::abs(run(0.025).layers[1](0, 0) - ref.layers[1](0, 0));
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("divergence is reported with the last finite record") {
    const auto p = problem(5, 20, 6, 2);
    Rng rng(5);
    const auto net = init_random(1.0, 1.0, 3, 30, 20, 2, rng);
    TrainConfig cfg;
    cfg.mode = DescentMode{1.0, false, 0.5};
    cfg.record_every = 1;
    try {
        train(net, p.ds.x, p.ds.y, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::isfinite(e.last_record().loss));
    }
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.loss_tolerance = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.mode = DescentMode{-1.0, false, 0.5};
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.mode = FlowMode{FlowMode::Integrator::rk4, 0.0, false, 1e-9};
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("infinite tolerance takes no steps") {
    const auto p = problem(6, 10, 4, 1);
    Rng rng(6);
    TrainConfig cfg;
    cfg.loss_tolerance = INFINITY;
    const auto res = train(init_random(0.3, 1, 3, 20, 10, 1, rng), p.ds.x, p.ds.y, cfg);
    CHECK(res.trace.size() == 1);
    CHECK(res.trace.steps_taken == 0);
    CHECK(res.trace.converged);
}

TEST_CASE("zero first layer and modified identity reach the minimum-norm interpolant") {
    const auto p = problem(7, 30, 10, 2);
    const Mat l2 = min_norm_interpolant(p.ds.x, p.ds.y);
    Rng rng(7);
    const auto zero = train(init_random(0.0, 1.0, 3, 64, 30, 2, rng), p.ds.x, p.ds.y, auto_descent(1e-14));
    REQUIRE(zero.trace.converged);
    CHECK(rel_err(end_to_end(zero.net), l2) < 1e-6);

    const auto ident = train(init_modified_identity(3, 30, 2), p.ds.x, p.ds.y, auto_descent(1e-14));
    REQUIRE(ident.trace.converged);
    CHECK(rel_err(end_to_end(ident.net), l2) < 1e-6);
}

TEST_CASE("trace invariants") {
    const auto p = problem(8, 30, 10, 2);
    Rng rng(8);
    const auto net = init_random(0.5, 1.0, 3, 60, 30, 2, rng);
    const double x_op = operator_norm(p.ds.x);
    TrainConfig cfg;
    cfg.mode = FlowMode{FlowMode::Integrator::rk4, 1e-3 / (x_op * x_op), false, 1e-9};
    cfg.max_steps = 4000;
    cfg.loss_tolerance = 1e-12;
    const auto res = train(net, p.ds.x, p.ds.y, cfg);
    const auto& tr = res.trace;
    CHECK(tr.monotonicity_violations == 0);
    for (std::size_t i = 1; i < tr.size(); ++i) {
        CHECK(tr.losses[i] <= tr.losses[i - 1]);
        CHECK(tr.sqrt_loss_integral[i] >= tr.sqrt_loss_integral[i - 1]);
        CHECK(tr.lambda_bound[i] >= 1.0);
        CHECK(tr.w1_nullspace_drift[i] < 1e-8 * net.layers[0].norm());
        CHECK(tr.theta_perp_norm[i] <= theta_perp_growth_bound(tr, i, 3, x_op, tr.max_lambda_bound()));
    }
    const auto dir = testutil::scratch_dir("trace");
    std::filesystem::create_directories(dir);
    write_trace_csv(dir / "trace.csv", tr);
    std::ifstream in(dir / "trace.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "time,loss,lambda_bound,theta_perp_norm,w1_drift,sqrt_loss_integral");
    std::filesystem::remove_all(dir);
}

TEST_CASE("descent leaves the null-space part of W_1 in place") {
    const auto p = problem(9, 40, 12, 3);
    Rng rng(9);
    const auto net = init_random(1.0, 1.0, 3, 80, 40, 3, rng);
    const auto res = train(net, p.ds.x, p.ds.y, auto_descent());
    REQUIRE(res.trace.converged);
    for (double drift : res.trace.w1_nullspace_drift) CHECK(drift < 1e-10 * net.layers[0].norm());
    // Projection identity: ||P_X Theta - Theta_l2|| <= sqrt(loss) / sigma_min(X).
    const RowSpace rows(p.ds.x);
    const double gap = (rows.project(end_to_end(res.net)) - min_norm_interpolant(rows, p.ds.y)).norm();
    CHECK(gap <= std::sqrt(res.trace.losses.back() / rows.min_eigenvalue()) * (1 + 1e-8) + 1e-13);
}

TEST_CASE("full and compressed networks follow the same trajectory") {
    const auto p = problem(10, 5, 3, 2);
    Rng rng(10);
    const auto full = init_random(0.6, 0.9, 3, 40, 5, 2, rng);
    const auto small = compress_hidden(full);
    REQUIRE(small.rank() < full.rank());
    TrainConfig cfg;
    cfg.mode = DescentMode{1e-4, false, 0.5};
    cfg.max_steps = 300;
    cfg.loss_tolerance = 1e-30;
    const auto a = train(full, p.ds.x, p.ds.y, cfg), b = train(small, p.ds.x, p.ds.y, cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    CHECK(rel_err(end_to_end(b.net), end_to_end(a.net)) < 1e-10);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(b.trace.losses[i] == doctest::Approx(a.trace.losses[i]).epsilon(1e-10));
        CHECK(b.trace.lambda_bound[i] == doctest::Approx(a.trace.lambda_bound[i]).epsilon(1e-8));
    }

    cfg.mode = FlowMode{FlowMode::Integrator::rk4, 1e-4, false, 1e-9};
    const auto fa = train(full, p.ds.x, p.ds.y, cfg), fb = train(small, p.ds.x, p.ds.y, cfg);
    CHECK(rel_err(end_to_end(fb.net), end_to_end(fa.net)) < 1e-10);
}

TEST_CASE("loss decays inside the envelope above the scale threshold") {
    const auto p = problem(11, 20, 8, 2);
    const auto th = decay_threshold(p.ds.x, p.ds.y, 3, 0.1, 0.1);
    CHECK(th.beta_min >= 1.0);
    CHECK(th.width_min >= 20 + 2 + std::log(10.0));
    const double beta = 1.5 * th.beta_min;
    Rng rng(11);
    const auto net = init_random(0.1, beta, 3, 100, 20, 2, rng);
    const double x_op = operator_norm(p.ds.x), smin = sigma_min_wide(p.ds.x);
    TrainConfig cfg;
    cfg.mode = FlowMode{FlowMode::Integrator::rk4, 1e-3 / (beta * beta * x_op * x_op), false, 1e-9};
    cfg.max_steps = 5000;
    cfg.loss_tolerance = 1e-12;
    const auto res = train(net, p.ds.x, p.ds.y, cfg);
    for (std::size_t i = 0; i < res.trace.size(); ++i)
        CHECK(res.trace.losses[i] <= loss_envelope(res.trace.losses[0], beta, smin, res.trace.times[i]) * (1 + 1e-12));
    CHECK(sqrt_loss_tail_estimate(4.0, 1.0, 1.0) == doctest::Approx(2 * 2 * 4 * std::exp(1.0)));
}

TEST_CASE("adaptive flow stays within tolerance of fixed fine steps") {
    const auto p = problem(12, 10, 4, 1);
    Rng rng(12);
    const auto net = init_random(0.3, 1.0, 3, 20, 10, 1, rng);
    TrainConfig cfg;
    cfg.mode = FlowMode{FlowMode::Integrator::rk4, 0.05, true, 1e-10};
    cfg.max_steps = 200;
    cfg.loss_tolerance = 1e-30;
    const auto res = train(net, p.ds.x, p.ds.y, cfg);
    TrainConfig fine = cfg;
    fine.mode = FlowMode{FlowMode::Integrator::rk4, 1e-4, false, 1e-9};
    fine.max_steps = static_cast<std::size_t>(std::lround(res.trace.times.back() / 1e-4));
    const auto ref = train(net, p.ds.x, p.ds.y, fine);
    const double t_gap = std::abs(ref.trace.times.back() - res.trace.times.back());
    CHECK(t_gap < 1e-4);
    CHECK(res.trace.losses.back() == doctest::Approx(ref.trace.losses.back()).epsilon(1e-2));
}

}
