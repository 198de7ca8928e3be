#pragma once

#include <cstddef>
#include <vector>

#include "benign/common.hpp"

namespace benign::bench {

/// Bias-free ReLU network: f(x) = W_L relu(W_{L-1} ... relu(W_1 x)).
/// Layers are stored out x in; a batch is one sample per row.
struct MlpNetwork {
    std::vector<Mat> layers;

    std::size_t depth() const { return layers.size(); }
    void validate() const;
};

/// Teacher: Gaussian entries with variance 1 / fan_in.
MlpNetwork lecun_mlp(const std::vector<std::size_t>& sizes, Rng& rng);

/// Student: W_1 ~ N(0, alpha^2), middle layers identity, W_L ~ N(0, beta^2).
MlpNetwork scaled_identity_mlp(std::size_t d, std::size_t width, std::size_t q, std::size_t depth,
                               double alpha, double beta, Rng& rng);

/// Batch forward pass (n x d -> n x q).
Mat relu_forward(const MlpNetwork& net, const Mat& x);

/// ||Y - f(X)||^2 and its gradient per layer.
struct MlpGradient {
    double loss = 0.0;
    std::vector<Mat> grads;
};
MlpGradient mlp_gradient(const MlpNetwork& net, const Mat& x, const Mat& y);

struct MlpTrainConfig {
    double loss_tolerance = 1e-7;
    std::size_t max_steps = 20'000;
    double safety = 0.5;
    std::size_t refresh_every = 50;  // recompute the norm-based step
    // > 1: multiply the step by this after every accepted step; a step that
    // raises the loss is undone and the step halved. The norm-based value
    // is then only the starting point.
    double growth = 1.0;
};

struct MlpTrainResult {
    MlpNetwork net;
    double final_loss = 0.0;
    std::size_t steps = 0;
    bool converged = false;
};

/// Full-batch descent starting from step safety / (||X||_op^2 sum_j
/// prod_{k!=j} ||W_k||_op^2). With growth == 1 the step is halved when the
/// loss increases and capped by the refreshed norm-based value.
MlpTrainResult train_mlp(MlpNetwork net, const Mat& x, const Mat& y, const MlpTrainConfig& cfg);

}  // namespace benign::bench
