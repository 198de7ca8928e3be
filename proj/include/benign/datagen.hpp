#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "benign/common.hpp"
#include "benign/spectrum.hpp"

namespace benign {

/// Linear-Gaussian generative model: x = u Sigma^{1/2} R^T with u ~ N(0, I),
/// y = x Theta* + omega with omega ~ N(0, noise_scale^2 I).
struct RegressionTask {
    CovarianceSpectrum spectrum;
    std::optional<Mat> rotation;  // eigenbasis of Sigma; identity when absent
    Mat theta_star;               // d x q
    double noise_scale = 1.0;

    std::size_t d() const { return spectrum.dim(); }
    std::size_t q() const { return static_cast<std::size_t>(theta_star.cols()); }

    /// Shapes, finiteness, orthogonality of the rotation (1e-10 Frobenius).
    void validate() const;

    /// Dense covariance R diag(lambda) R^T.
    Mat covariance() const;
    /// G = diag(sqrt(lambda)) R^T, so that x = u G.
    Mat sampling_factor() const;
};

struct Dataset {
    Mat x;      // n x d
    Mat y;      // n x q
    Mat omega;  // n x q, stored noise: y = x Theta* + omega
    std::uint64_t seed = 0;

    std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
};

/// Gaussian entries rescaled to unit Frobenius norm (uniform on the sphere).
Mat sample_theta_star(std::size_t d, std::size_t q, Rng& rng);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign fixed).
Mat random_orthogonal(std::size_t d, Rng& rng);

/// Convenience constructor; draws Theta* (and a rotation if requested).
RegressionTask make_task(CovarianceSpectrum spectrum, std::size_t q, double noise_scale,
                         bool random_rotation, Rng& rng);

/// `count` covariate rows from the task's distribution.
Mat sample_covariates(const RegressionTask& task, std::size_t count, Rng& rng);

/// Fresh training set; identical (task, n, seed) gives bit-identical output.
Dataset sample_dataset(const RegressionTask& task, std::size_t n, std::uint64_t seed);

struct AssumptionReport {
    bool full_row_rank = false;   // rank(XX^T) == n
    double condition = 0.0;       // of XX^T; +inf when singular
    double x_op = 0.0;            // ||X||_op
    double x_fro = 0.0;           // ||X||
    double y_fro = 0.0;           // ||Y||
    double op_ratio = 0.0;        // ||X||_op / sqrt(lambda_1 n)  (0 without spectrum)
    double fro_ratio = 0.0;       // ||X|| / sqrt(n s_0)          (0 without spectrum)
};

AssumptionReport check_assumptions(const Dataset& ds,
                                   const CovarianceSpectrum* spectrum = nullptr);

/// Directory layout: X.csv, Y.csv, Omega.csv, theta_star.csv, optional
/// rotation.csv and manifest.json {n, d, q, seed, task}.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const RegressionTask& task);

struct LoadedDataset {
    Dataset data;
    RegressionTask task;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

nlohmann::json task_to_json(const RegressionTask& task);

}  // namespace benign
