#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "benign/common.hpp"
#include "benign/linalg.hpp"
#include "benign/network.hpp"

namespace benign {

/// Full-batch gradient descent. With `auto_step` the step is
/// safety / (||X||_op^2 sum_j prod_{k != j} ||W_k||_op^2), refreshed at every
/// record and halved whenever the loss increases; `step_size` is then only
/// an upper limit.
struct DescentMode {
    double step_size = 1e-4;
    bool auto_step = false;
    double safety = 0.5;
};

/// Gradient flow integrated with a fixed step `dt`. `adapt` enables
/// step-doubling error control: a step is halved until one dt step and two
/// dt/2 steps agree to `local_tolerance` (Frobenius, all layers).
struct FlowMode {
    enum class Integrator { euler, rk4 };
    Integrator integrator = Integrator::rk4;
    double dt = 1e-3;
    bool adapt = false;
    double local_tolerance = 1e-9;
};

struct TrainConfig {
    std::variant<DescentMode, FlowMode> mode = DescentMode{};
    double loss_tolerance = 1e-7;
    std::size_t max_steps = 1'000'000;
    std::size_t record_every = 10;
    // Power-iteration settings for the lambda_bound monitor and auto step.
    PowerIterationOptions norm_options{};

    void validate() const;
};

/// One row of a training trace.
struct TraceRecord {
    std::size_t step = 0;
    double time = 0.0;
    double loss = 0.0;
    double lambda_bound = 1.0;
    double theta_perp_norm = 0.0;
    double w1_drift = 0.0;
    double sqrt_loss_integral = 0.0;
};

struct TrainTrace {
    std::vector<std::size_t> steps;
    std::vector<double> times;
    std::vector<double> losses;
    std::vector<double> lambda_bound;
    std::vector<double> theta_perp_norm;
    std::vector<double> w1_nullspace_drift;
    std::vector<double> sqrt_loss_integral;
    bool converged = false;
    std::size_t steps_taken = 0;
    // Recorded losses that exceed their predecessor.
    std::size_t monotonicity_violations = 0;
    // Estimate of the integral of sqrt(L) beyond the last record (0 unless
    // computed by the caller through sqrt_loss_tail_estimate).
    double sqrt_loss_tail = 0.0;

    std::size_t size() const { return losses.size(); }
    TraceRecord record(std::size_t i) const;
    void push(const TraceRecord& r);
    double max_lambda_bound() const;
};

/// Non-finite loss or weights during training; carries the last finite
/// trace record.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, TraceRecord last) : Error(what), last_(last) {}
    const TraceRecord& last_record() const { return last_; }

private:
    TraceRecord last_;
};

struct TrainResult {
    DeepLinearNetwork net;
    TrainTrace trace;
};

/// ||Y - X end_to_end(net)||^2.
double loss(const DeepLinearNetwork& net, const Mat& x, const Mat& y);

/// Exact gradient of the loss with respect to W_j, j in [1, L]:
/// 2 (W_L..W_{j+1})^T (X Theta - Y)^T (W_{j-1}..W_1 X^T)^T.
Mat layer_gradient(const DeepLinearNetwork& net, const Mat& x, const Mat& y, std::size_t j);

/// All layer gradients at once, sharing the products.
std::vector<Mat> layer_gradients(const DeepLinearNetwork& net, const Mat& x, const Mat& y);

/// W_j <- W_j - step * grad_j for all j, gradients taken before the update.
/// Throws DivergenceError on non-finite weights.
DeepLinearNetwork step_descent(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double step);

DeepLinearNetwork step_flow_euler(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double dt);

/// Classical Runge-Kutta step of dW_j/dt = -grad_j over all layers jointly.
DeepLinearNetwork step_flow_rk4(const DeepLinearNetwork& net, const Mat& x, const Mat& y, double dt);

/// Closed-form d Theta / dt under gradient flow:
/// -2 sum_j (W_{<j})^T W_{<j} X^T (X Theta - Y) W_{>j} (W_{>j})^T.
Mat dtheta_dt(const DeepLinearNetwork& net, const Mat& x, const Mat& y);

/// Run until loss <= loss_tolerance or max_steps. `rows` (optional) is a
/// factorization of XX^T reused across runs on the same data; when null one
/// is built here (SingularError if XX^T is singular).
TrainResult train(DeepLinearNetwork net, const Mat& x, const Mat& y, const TrainConfig& cfg,
                  const RowSpace* rows = nullptr);

/// CSV columns: time, loss, lambda_bound, theta_perp_norm, w1_drift,
/// sqrt_loss_integral.
void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);

/// Right-hand side of the Theta_perp growth bound at record i:
/// ||Theta_perp(0)|| + 2 (L - 1) ||X||_op Lambda^2 int_0^t sqrt(L).
/// The factor 2 matches the exact-gradient convention.
double theta_perp_growth_bound(const TrainTrace& trace, std::size_t i, std::size_t depth,
                               double x_op, double lambda_max);

/// Sufficient scale and width for the loss-decay envelope (absolute
/// constant set to 1).
struct DecayThreshold {
    double beta_min = 0.0;
    double width_min = 0.0;
};
DecayThreshold decay_threshold(const Mat& x, const Mat& y, std::size_t depth, double alpha,
                               double delta);

/// L(0) exp(-beta^2 sigma_min^2 t / (4e)).
double loss_envelope(double loss0, double beta, double sigma_min, double t);

/// Integral of sqrt(L) from the last record to infinity if the loss decays
/// at the envelope rate from there on: 2 sqrt(L_T) / rate, with
/// rate = beta^2 sigma_min^2 / (4e).
double sqrt_loss_tail_estimate(double loss_t, double beta, double sigma_min);

}  // namespace benign
