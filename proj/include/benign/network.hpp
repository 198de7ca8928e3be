#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "benign/common.hpp"
#include "benign/linalg.hpp"

namespace benign {

/// Weights W_1 (r x d), W_2..W_{L-1} (r x r), W_L (q x r) of a deep linear
/// network with end-to-end map Theta = (W_L ... W_1)^T.
///
/// `hidden_complement` counts extra hidden units on which W_1 and W_L are
/// zero and every middle layer acts as the identity. A width-m network with
/// identity middle layers is exactly equivalent, under gradient dynamics, to
/// its compression onto span(W_1, W_L^T) plus such a complement; the nominal
/// width is rows(W_1) + hidden_complement.
struct DeepLinearNetwork {
    std::vector<Mat> layers;
    std::size_t hidden_complement = 0;

    std::size_t depth() const { return layers.size(); }
    std::size_t rank() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().rows()); }
    std::size_t width() const { return rank() + hidden_complement; }
    std::size_t input_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().cols()); }
    std::size_t output_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().rows()); }

    /// Shape chain and finiteness; throws ShapeError / DomainError.
    void validate() const;
};

struct InitSpec {
    enum class Kind { random, modified_identity };
    Kind kind = Kind::random;
    double alpha = 1.0;  // std of W_1 entries
    double beta = 1.0;   // std of W_L entries
};

nlohmann::json init_spec_to_json(const InitSpec& spec);
InitSpec init_spec_from_json(const nlohmann::json& j);

/// (W_L ... W_1)^T, multiplied from the output side so every intermediate is
/// (rows) x q.
Mat end_to_end(const DeepLinearNetwork& net);

/// W_1 ~ N(0, alpha^2), W_L ~ N(0, beta^2) entrywise, middle layers I_m.
DeepLinearNetwork init_random(double alpha, double beta, std::size_t depth, std::size_t m,
                              std::size_t d, std::size_t q, Rng& rng);

/// Same distribution of trajectories as init_random, stored compressed.
///
/// [W_1, W_L^T] = G diag(alpha..., beta...) with G an m x (d+q) Gaussian
/// matrix; G = Q R and only R matters up to a rotation of the hidden space.
/// R is drawn directly (Bartlett: R_ii^2 ~ chi^2_{m-i+1}, R_ij ~ N(0,1) above
/// the diagonal), so the cost is independent of m. Columns with zero scale
/// are dropped before sampling. Falls back to init_random when m does not
/// exceed the number of sampled columns.
DeepLinearNetwork init_random_reduced(double alpha, double beta, std::size_t depth,
                                      std::size_t m, std::size_t d, std::size_t q, Rng& rng);

/// m = d + q, W_1 = [I_d; 0], middle layers I, W_L = [0, I_q]; Theta = 0.
DeepLinearNetwork init_modified_identity(std::size_t depth, std::size_t d, std::size_t q);

/// Dispatch on InitSpec; `reduced` selects init_random_reduced for the
/// random kind.
DeepLinearNetwork initialize(const InitSpec& spec, std::size_t depth, std::size_t m,
                             std::size_t d, std::size_t q, Rng& rng, bool reduced = false);

/// Exact compression of a network whose middle layers are the identity onto
/// the column span of [W_1, W_L^T]. Throws DomainError when a middle layer is
/// not the identity.
DeepLinearNetwork compress_hidden(const DeepLinearNetwork& net, double rel_tol = 1e-13);

/// ||W_j||_op per layer. For middle layers of a compressed network the
/// implicit identity block contributes max(., 1). `warm` (optional) holds one
/// power-iteration start vector per layer across calls.
std::vector<double> layer_op_norms(const DeepLinearNetwork& net, std::vector<Vec>* warm = nullptr,
                                   const PowerIterationOptions& opts = {});

/// max over subsets S of prod_{j in S} norms[j]: the product of the factors
/// exceeding 1 (1 for the empty set).
double max_subset_opnorm_product(const std::vector<double>& norms);
double max_subset_opnorm_product(const DeepLinearNetwork& net);

/// Checkpoint directory: layer_<j>.csv (1-based) plus manifest.json
/// {L, m, d, q, init_spec, seed, hidden_complement}.
void save_checkpoint(const std::filesystem::path& dir, const DeepLinearNetwork& net,
                     const InitSpec& spec, std::uint64_t seed);

struct Checkpoint {
    DeepLinearNetwork net;
    InitSpec spec;
    std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace benign
