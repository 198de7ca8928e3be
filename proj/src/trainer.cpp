#include "benign/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "benign/kernels.hpp"

namespace benign {
namespace {

// grad_k = 2 pt[k] st[k]^T (0-based layer k).
//   pt[k] = (W_L ... W_{k+2})^T, pt[L-1] = I_q
//   st[k] = W_k ... W_1 X^T R,   st[0] = X^T R
struct Factors {
    std::vector<Mat> pt;
    std::vector<Mat> st;
    Mat theta;
    Mat residual;  // X Theta - Y
    double loss = 0.0;
};

void check_data(const DeepLinearNetwork& net, const Mat& x, const Mat& y) {
    net.validate();
    require_shape(x.cols() == static_cast<Eigen::Index>(net.input_dim()),
                  "X has " + std::to_string(x.cols()) + " columns, network expects d = " +
                      std::to_string(net.input_dim()));
    require_shape(y.cols() == static_cast<Eigen::Index>(net.output_dim()),
                  "Y has " + std::to_string(y.cols()) + " columns, network expects q = " +
                      std::to_string(net.output_dim()));
    require_shape(x.rows() == y.rows(), "X and Y must have the same number of rows");
}

Factors factorize(const DeepLinearNetwork& net, const Mat& x, const Mat& y) {
    const std::size_t depth = net.depth();
    Factors f;
    f.pt.resize(depth);
    f.st.resize(depth);
    const auto q = static_cast<Eigen::Index>(net.output_dim());
    f.pt[depth - 1] = Mat::Identity(q, q);
    f.pt[depth - 2] = net.layers.back().transpose();
    for (std::size_t k = depth - 2; k-- > 0;) f.pt[k] = kernels::mul_tn(f.pt[k + 1], net.layers[k + 1]);
    f.theta = kernels::mul_tn(f.pt[0], net.layers[0]);
    f.residual = kernels::mul_nn_skinny(x, f.theta) - y;
    f.loss = kernels::sum_squares({f.residual.data(), static_cast<std::size_t>(f.residual.size())});
    f.st[0] = kernels::mul_tn(f.residual, x);
    for (std::size_t k = 1; k < depth; ++k) f.st[k] = kernels::mul_nn_skinny(net.layers[k - 1], f.st[k - 1]);
    return f;
}

// net.W_k += -2 scale pt[k] st[k]^T, i.e. net += -scale * grad.
void apply(DeepLinearNetwork& net, const Factors& f, double scale) {
    for (std::size_t k = 0; k < net.depth(); ++k) kernels::add_outer(net.layers[k], f.pt[k], f.st[k], -2.0 * scale);
}

bool finite_weights(const DeepLinearNetwork& net) {
    for (const auto& w : net.layers)
        if (!w.allFinite()) return false;
    return true;
}

DeepLinearNetwork rk4(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double dt,
                      const Factors* k1_in = nullptr) {
    const Factors k1 = k1_in != nullptr ? *k1_in : factorize(net, x, y);
    DeepLinearNetwork tmp = net;
    apply(tmp, k1, dt / 2);
    const Factors k2 = factorize(tmp, x, y);
    tmp = net;
    apply(tmp, k2, dt / 2);
    const Factors k3 = factorize(tmp, x, y);
    tmp = net;
    apply(tmp, k3, dt);
    const Factors k4 = factorize(tmp, x, y);
    DeepLinearNetwork out = net;
    apply(out, k1, dt / 6);
    apply(out, k2, dt / 3);
    apply(out, k3, dt / 3);
    apply(out, k4, dt / 6);
    return out;
}

double layer_distance(const DeepLinearNetwork& a, const DeepLinearNetwork& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.depth(); ++k) s += (a.layers[k] - b.layers[k]).squaredNorm();
    return std::sqrt(s);
}

double auto_step(const std::vector<double>& norms, double x_op, double safety) {
    double total = 0.0;
    for (std::size_t j = 0; j < norms.size(); ++j) {
        double prod = 1.0;
        for (std::size_t k = 0; k < norms.size(); ++k)
            if (k != j) prod *= norms[k] * norms[k];
        total += prod;
    }
    total *= x_op * x_op;
    return total > 0.0 ? safety / total : std::numeric_limits<double>::infinity();
}

}  // namespace

void TrainConfig::validate() const {
    if (!(loss_tolerance > 0.0)) throw DomainError("loss_tolerance must be positive");
    if (record_every < 1) throw DomainError("record_every must be at least 1");
    if (const auto* d = std::get_if<DescentMode>(&mode)) {
        if (!(d->step_size > 0.0) || !std::isfinite(d->step_size)) throw DomainError("step_size must be positive");
        if (d->auto_step && !(d->safety > 0.0 && d->safety <= 1.0))
            throw DomainError("auto-step safety must lie in (0, 1]");
    } else {
        const auto& f = std::get<FlowMode>(mode);
        if (!(f.dt > 0.0) || !std::isfinite(f.dt)) throw DomainError("dt must be positive");
        if (f.adapt && !(f.local_tolerance > 0.0)) throw DomainError("local_tolerance must be positive");
    }
}

TraceRecord TrainTrace::record(std::size_t i) const {
    return {steps.at(i),          times.at(i),
            losses.at(i),         lambda_bound.at(i),
            theta_perp_norm.at(i), w1_nullspace_drift.at(i),
            sqrt_loss_integral.at(i)};
}

void TrainTrace::push(const TraceRecord& r) {
    if (!losses.empty() && r.loss > losses.back()) ++monotonicity_violations;
    steps.push_back(r.step);
    times.push_back(r.time);
    losses.push_back(r.loss);
    lambda_bound.push_back(r.lambda_bound);
    theta_perp_norm.push_back(r.theta_perp_norm);
    w1_nullspace_drift.push_back(r.w1_drift);
    sqrt_loss_integral.push_back(r.sqrt_loss_integral);
}

double TrainTrace::max_lambda_bound() const {
    double m = 1.0;
    for (double v : lambda_bound) m = std::max(m, v);
    return m;
}

double loss(const DeepLinearNetwork& net, const Mat& x, const Mat& y) {
    check_data(net, x, y);
    const Mat r = y - x * end_to_end(net);
    return r.squaredNorm();
}

std::vector<Mat> layer_gradients(const DeepLinearNetwork& net, const Mat& x, const Mat& y) {
    check_data(net, x, y);
    const Factors f = factorize(net, x, y);
    std::vector<Mat> g(net.depth());
    for (std::size_t k = 0; k < net.depth(); ++k) g[k] = 2.0 * f.pt[k] * f.st[k].transpose();
    return g;
}

Mat layer_gradient(const DeepLinearNetwork& net, const Mat& x, const Mat& y, std::size_t j) {
    if (j < 1 || j > net.depth())
        throw DomainError("layer index " + std::to_string(j) + " outside [1, " + std::to_string(net.depth()) + "]");
    check_data(net, x, y);
    const Factors f = factorize(net, x, y);
    return 2.0 * f.pt[j - 1] * f.st[j - 1].transpose();
}

DeepLinearNetwork step_descent(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double step) {
    if (!(step >= 0.0)) throw DomainError("step size must be non-negative");
    check_data(net, x, y);
    DeepLinearNetwork out = net;
    apply(out, factorize(net, x, y), step);
    if (!finite_weights(out)) throw DivergenceError("non-finite weights after descent step", {});
    return out;
}

DeepLinearNetwork step_flow_euler(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double dt) {
    return step_descent(net, x, y, dt);
}

DeepLinearNetwork step_flow_rk4(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double dt) {
    if (!(dt >= 0.0)) throw DomainError("dt must be non-negative");
    check_data(net, x, y);
    DeepLinearNetwork out = rk4(net, x, y, dt);
    if (!finite_weights(out)) throw DivergenceError("non-finite weights after RK4 step", {});
    return out;
}

Mat dtheta_dt(const DeepLinearNetwork& net, const Mat& x, const Mat& y) {
    check_data(net, x, y);
    const std::size_t depth = net.depth();
    const Mat theta = end_to_end(net);
    const Mat xtr = x.transpose() * (x * theta - y);  // d x q
    const auto d = static_cast<Eigen::Index>(net.input_dim());
    const auto q = static_cast<Eigen::Index>(net.output_dim());
    Mat out = Mat::Zero(d, q);
    for (std::size_t j = 0; j < depth; ++j) {
        Mat below = Mat::Identity(d, d);  // W_{j-1} ... W_1
        for (std::size_t k = 0; k < j; ++k) below = net.layers[k] * below;
        Mat above = Mat::Identity(q, q);  // W_L ... W_{j+1}
        for (std::size_t k = depth; k-- > j + 1;) above = above * net.layers[k];
        out -= 2.0 * below.transpose() * below * xtr * above * above.transpose();
    }
    return out;
}

TrainResult train(DeepLinearNetwork net, const Mat& x, const Mat& y, const TrainConfig& cfg,
                  const RowSpace* rows) {
    cfg.validate();
    check_data(net, x, y);
    std::optional<RowSpace> own;
    if (rows == nullptr) {
        own.emplace(x);
        rows = &*own;
    }
    require_shape(rows->data().rows() == x.rows() && rows->data().cols() == x.cols(),
                  "row-space factorization does not match X");

    const Mat w1_initial_perp = rows->project_out_rows(net.layers.front());
    const double x_op = std::sqrt(rows->max_eigenvalue());
    std::vector<Vec> warm;

    const auto* descent = std::get_if<DescentMode>(&cfg.mode);
    const auto* flow = std::get_if<FlowMode>(&cfg.mode);
    double step = descent != nullptr ? descent->step_size : flow->dt;
    const bool adaptive_step = descent != nullptr && descent->auto_step;

    TrainResult result;
    TrainTrace& trace = result.trace;
    TraceRecord last;
    std::vector<double> norms;

    auto make_record = [&](std::size_t s, double t, const Factors& f, double integral) {
        TraceRecord r;
        r.step = s;
        r.time = t;
        r.loss = f.loss;
        norms = layer_op_norms(net, &warm, cfg.norm_options);
        r.lambda_bound = max_subset_opnorm_product(norms);
        r.theta_perp_norm = rows->project_out(f.theta).norm();
        r.w1_drift = (rows->project_out_rows(net.layers.front()) - w1_initial_perp).norm();
        r.sqrt_loss_integral = integral;
        return r;
    };

    double t = 0.0;
    double integral = 0.0;
    std::size_t s = 0;
    Factors f = factorize(net, x, y);
    if (!std::isfinite(f.loss)) throw DivergenceError("initial loss is not finite", last);
    last = make_record(0, 0.0, f, 0.0);
    trace.push(last);
    if (adaptive_step) step = std::min(descent->step_size, auto_step(norms, x_op, descent->safety));

    while (f.loss > cfg.loss_tolerance && s < cfg.max_steps) {
        const double prev_sqrt = std::sqrt(f.loss);
        const double prev_loss = f.loss;
        double taken = step;
        if (descent != nullptr || flow->integrator == FlowMode::Integrator::euler) {
            if (flow != nullptr && flow->adapt) {
                // Euler with step doubling.
                for (;;) {
                    DeepLinearNetwork one = net;
                    apply(one, f, taken);
                    DeepLinearNetwork two = net;
                    apply(two, f, taken / 2);
                    apply(two, factorize(two, x, y), taken / 2);
                    if (layer_distance(one, two) <= flow->local_tolerance || taken < 1e-300) {
                        net = std::move(two);
                        break;
                    }
                    taken /= 2;
                }
            } else {
                apply(net, f, taken);
            }
        } else if (!flow->adapt) {
            net = rk4(net, x, y, taken, &f);
        } else {
            for (;;) {
                DeepLinearNetwork one = rk4(net, x, y, taken, &f);
                DeepLinearNetwork two = rk4(rk4(net, x, y, taken / 2, &f), x, y, taken / 2);
                if (layer_distance(one, two) <= flow->local_tolerance || taken < 1e-300) {
                    net = std::move(two);
                    break;
                }
                taken /= 2;
            }
        }
        ++s;
        t += taken;
        f = factorize(net, x, y);
        if (!std::isfinite(f.loss)) {
            throw DivergenceError("loss became non-finite at step " + std::to_string(s) +
                                      " (last finite record: step " + std::to_string(last.step) +
                                      ", loss " + std::to_string(last.loss) + ")",
                                  last);
        }
        integral += taken * (prev_sqrt + std::sqrt(f.loss)) / 2;
        if (flow != nullptr && flow->adapt && taken == step && step < flow->dt) step = std::min(flow->dt, 2 * step);
        if (flow != nullptr && flow->adapt && taken < step) step = taken;
        if (adaptive_step && f.loss > prev_loss) step /= 2;

        const bool done = f.loss <= cfg.loss_tolerance || s >= cfg.max_steps;
        if (s % cfg.record_every == 0 || done) {
            last = make_record(s, t, f, integral);
            trace.push(last);
            if (adaptive_step)
                step = std::min(step, auto_step(norms, x_op, descent->safety));
        }
    }
    trace.converged = f.loss <= cfg.loss_tolerance;
    trace.steps_taken = s;
    result.net = std::move(net);
    return result;
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
    std::FILE* out = std::fopen(path.string().c_str(), "w");
    if (out == nullptr) throw IoError("cannot write " + path.string());
    std::fprintf(out, "time,loss,lambda_bound,theta_perp_norm,w1_drift,sqrt_loss_integral\n");
    for (std::size_t i = 0; i < trace.size(); ++i)
        std::fprintf(out, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", trace.times[i], trace.losses[i],
                     trace.lambda_bound[i], trace.theta_perp_norm[i], trace.w1_nullspace_drift[i],
                     trace.sqrt_loss_integral[i]);
    if (std::fclose(out) != 0) throw IoError("error closing " + path.string());
}

double theta_perp_growth_bound(const TrainTrace& trace, std::size_t i, std::size_t depth,
                               double x_op, double lambda_max) {
    return trace.theta_perp_norm.at(0) +
           2.0 * static_cast<double>(depth - 1) * x_op * lambda_max * lambda_max * trace.sqrt_loss_integral.at(i);
}

DecayThreshold decay_threshold(const Mat& x, const Mat& y, std::size_t depth, double alpha, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    const double smin = sigma_min_wide(x);
    if (!(smin > 0.0)) throw SingularError("sigma_min(X) = 0");
    const double x_op = operator_norm(x);
    const double s2 = smin * smin;
    const double ld = static_cast<double>(depth);
    const double n = static_cast<double>(x.rows());
    const double d = static_cast<double>(x.cols());
    const double q = static_cast<double>(y.cols());
    DecayThreshold th;
    th.beta_min = std::max(1.0, std::sqrt(ld * x_op * y.norm() / s2));
    const double xf2 = x.squaredNorm();
    th.width_min = std::max(d + q + std::log(1.0 / delta),
                            ld * ld * alpha * alpha * x_op * x_op * xf2 * q * std::log(n / delta) /
                                (th.beta_min * th.beta_min * s2 * s2));
    return th;
}

double loss_envelope(double loss0, double beta, double sigma_min, double t) {
    return loss0 * std::exp(-beta * beta * sigma_min * sigma_min * t / (4.0 * std::exp(1.0)));
}

double sqrt_loss_tail_estimate(double loss_t, double beta, double sigma_min) {
    const double rate = beta * beta * sigma_min * sigma_min / (4.0 * std::exp(1.0));
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * std::sqrt(loss_t) / rate;
}

}  // namespace benign
