#include "benign/bench/mlp.hpp"

#include <cmath>
#include <limits>

#include "benign/kernels.hpp"
#include "benign/linalg.hpp"
#include "benign/trainer.hpp"

namespace benign::bench {
namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
    return m;
}

struct Forward {
    std::vector<Mat> inputs;  // input to layer j (post-activation of j-1)
    std::vector<Mat> pre;     // pre-activation of hidden layer j
    Mat out;
};

Forward forward(const MlpNetwork& net, const Mat& x) {
    Forward f;
    f.inputs.reserve(net.depth());
    f.pre.reserve(net.depth() - 1);
    Mat h = x;
    for (std::size_t j = 0; j + 1 < net.depth(); ++j) {
        f.inputs.push_back(h);
        Mat z = h * net.layers[j].transpose();
        h = z;
        kernels::relu(h);
        f.pre.push_back(std::move(z));
    }
    f.inputs.push_back(h);
    f.out = h * net.layers.back().transpose();
    return f;
}

}  // namespace

void MlpNetwork::validate() const {
    if (layers.size() < 2) throw ShapeError("MLP needs at least two layers");
    for (std::size_t j = 1; j < layers.size(); ++j)
        if (layers[j].cols() != layers[j - 1].rows())
            throw ShapeError("MLP layer " + std::to_string(j + 1) + " does not compose");
}

MlpNetwork lecun_mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
    if (sizes.size() < 3) throw DomainError("lecun_mlp: need input, at least one hidden and output size");
    MlpNetwork net;
    for (std::size_t j = 0; j + 1 < sizes.size(); ++j) {
        const double fan_in = static_cast<double>(sizes[j]);
        net.layers.push_back(gaussian(static_cast<Eigen::Index>(sizes[j + 1]), static_cast<Eigen::Index>(sizes[j]),
                                      1.0 / std::sqrt(fan_in), rng));
    }
    return net;
}

MlpNetwork scaled_identity_mlp(std::size_t d, std::size_t width, std::size_t q, std::size_t depth,
                               double alpha, double beta, Rng& rng) {
    if (depth < 2) throw DomainError("scaled_identity_mlp: depth must be at least 2");
    MlpNetwork net;
    const auto m = static_cast<Eigen::Index>(width);
    net.layers.push_back(gaussian(m, static_cast<Eigen::Index>(d), alpha, rng));
    for (std::size_t j = 1; j + 1 < depth; ++j) net.layers.push_back(Mat::Identity(m, m));
    net.layers.push_back(gaussian(static_cast<Eigen::Index>(q), m, beta, rng));
    return net;
}

Mat relu_forward(const MlpNetwork& net, const Mat& x) {
    net.validate();
    require_shape(x.cols() == net.layers.front().cols(), "relu_forward: input dimension mismatch");
    return forward(net, x).out;
}

MlpGradient mlp_gradient(const MlpNetwork& net, const Mat& x, const Mat& y) {
    net.validate();
    require_shape(x.cols() == net.layers.front().cols(), "mlp_gradient: input dimension mismatch");
    require_shape(y.rows() == x.rows() && y.cols() == net.layers.back().rows(), "mlp_gradient: Y shape mismatch");
    const Forward f = forward(net, x);
    MlpGradient g;
    Mat delta = 2.0 * (f.out - y);  // n x out
    g.loss = (f.out - y).squaredNorm();
    g.grads.resize(net.depth());
    for (std::size_t j = net.depth(); j-- > 0;) {
        g.grads[j] = delta.transpose() * f.inputs[j];
        if (j == 0) break;
        Mat back = delta * net.layers[j];
        kernels::relu_backward(f.pre[j - 1], back);
        delta = std::move(back);
    }
    return g;
}

MlpTrainResult train_mlp(MlpNetwork net, const Mat& x, const Mat& y, const MlpTrainConfig& cfg) {
    net.validate();
    if (!(cfg.safety > 0.0 && cfg.safety <= 1.0)) throw DomainError("train_mlp: safety must lie in (0, 1]");
    if (!(cfg.growth >= 1.0 && std::isfinite(cfg.growth))) throw DomainError("train_mlp: growth must be finite and >= 1");
    const double x_op = operator_norm(x);
    std::vector<Vec> warm(net.depth());
    auto norm_step = [&]() {
        std::vector<double> norms(net.depth());
        PowerIterationOptions opts;
        opts.tolerance = 1e-6;
        for (std::size_t j = 0; j < net.depth(); ++j) norms[j] = operator_norm(net.layers[j], &warm[j], opts);
        double total = 0.0;
        for (std::size_t j = 0; j < norms.size(); ++j) {
            double prod = 1.0;
            for (std::size_t k = 0; k < norms.size(); ++k)
                if (k != j) prod *= norms[k] * norms[k];
            total += prod;
        }
        total *= x_op * x_op;
        return total > 0.0 ? cfg.safety / total : 1.0;
    };

    MlpTrainResult res;
    double step = norm_step();
    MlpGradient g = mlp_gradient(net, x, y);
    double prev = g.loss;
    std::size_t s = 0;
    const bool grow = cfg.growth > 1.0;
    while (g.loss > cfg.loss_tolerance && s < cfg.max_steps) {
        const MlpNetwork before = grow ? net : MlpNetwork{};
        for (std::size_t j = 0; j < net.depth(); ++j) net.layers[j] -= step * g.grads[j];
        ++s;
        MlpGradient next = mlp_gradient(net, x, y);
        if (grow) {
            if (!(next.loss <= prev)) {
                net = before;
                step /= 2;
                if (step < 1e-300) throw DivergenceError("ReLU training step underflow at step " + std::to_string(s), {});
                continue;
            }
            step *= cfg.growth;
        } else {
            if (!std::isfinite(next.loss)) throw DivergenceError("ReLU training diverged at step " + std::to_string(s), {});
            if (next.loss > prev) step /= 2;
            if (cfg.refresh_every > 0 && s % cfg.refresh_every == 0) step = std::min(step, norm_step());
        }
        g = std::move(next);
        prev = g.loss;
    }
    res.final_loss = g.loss;
    res.steps = s;
    res.converged = g.loss <= cfg.loss_tolerance;
    res.net = std::move(net);
    return res;
}

}  // namespace benign::bench
