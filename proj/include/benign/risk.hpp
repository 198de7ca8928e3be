#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "benign/common.hpp"
#include "benign/datagen.hpp"
#include "benign/linalg.hpp"
#include "benign/spectrum.hpp"
#include "benign/trainer.hpp"

namespace benign {

/// X^T (XX^T)^{-1} X. SingularError when XX^T is singular or its condition
/// number exceeds 1e12.
Mat row_span_projector(const Mat& x);

/// Theta_l2 = X^T (XX^T)^{-1} Y.
Mat min_norm_interpolant(const Mat& x, const Mat& y);
Mat min_norm_interpolant(const RowSpace& rows, const Mat& y);

struct SpanDecomposition {
    Mat projector;          // P_X
    Mat theta_in_span;      // P_X Theta
    Mat theta_out_of_span;  // (I - P_X) Theta
};
SpanDecomposition span_decomposition(const Mat& theta, const Mat& x);

/// Tr((Theta - Theta*)^T Sigma (Theta - Theta*)).
double exact_excess_risk(const Mat& theta, const Mat& theta_star, const Mat& sigma);
/// Same, with Sigma taken from the task (no dense d x d product needed).
double exact_excess_risk(const Mat& theta, const RegressionTask& task);

struct MonteCarloEstimate {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * sample std / sqrt(samples)
    std::size_t samples = 0;
};

/// Mean of ||x (Theta - Theta*)||^2 over fresh covariates from the task.
MonteCarloEstimate mc_excess_risk(const Mat& theta, const RegressionTask& task, std::size_t samples,
                                  Rng& rng);

struct BiasVarianceMatrices {
    Mat b;  // (I - P_X) Sigma (I - P_X), d x d
    Mat c;  // (XX^T)^{-1} X Sigma X^T (XX^T)^{-1}, n x n
};
BiasVarianceMatrices bias_variance_matrices(const Mat& x, const Mat& sigma);

/// Tr(Omega^T C Omega), evaluated as Tr(F^T Sigma F) with
/// F = X^T (XX^T)^{-1} Omega. Depends on (X, Omega, Sigma) only.
double variance_term(const RowSpace& rows, const Mat& omega, const RegressionTask& task);

struct RiskOptions {
    double c = 1.0;  // constant in xi_term
    double b = 1.0;  // constant in the critical index
};

struct RiskReport {
    double exact_risk = 0.0;
    double mc_risk = 0.0;
    double mc_half_width = 0.0;
    std::size_t mc_samples = 0;
    double bias_term = 0.0;      // Tr(E^T Sigma E), E = (I - P_X)(Theta* - Theta_perp)
    double variance_term = 0.0;  // Tr(Omega^T C Omega)
    double cross_term = 0.0;     // -Tr(E^T Sigma F); exact risk = bias + variance + 2 cross
    double xi_term = 0.0;        // (2 c s_k / n) ||Theta_perp||^2, NaN when k is infinite
    double xi_constant = 1.0;
    std::optional<std::size_t> k;
    double theta_perp_norm = 0.0;
    double dist_to_min_norm = 0.0;  // ||Theta - Theta_l2||
};

/// All RiskReport fields; `mc_n` = 0 skips the Monte-Carlo estimate.
RiskReport risk_report(const Mat& theta, const Dataset& ds, const RegressionTask& task,
                       std::size_t mc_n, Rng& rng, const RiskOptions& opts = {},
                       const RowSpace* rows = nullptr);

nlohmann::json risk_report_to_json(const RiskReport& r);

/// Writes B.csv and C.csv.
void dump_bias_variance_csv(const std::filesystem::path& dir, const BiasVarianceMatrices& m);

/// Random-init bound on Xi:
/// (c a^2 s_k / n) [q b^2 + L^2 (a + 1/L)^4 lambda_1 n^2 / s_k^2
///                   (lambda_1 ||Theta*||^2 + q + a^2 b^2 s_0 q ln(n/delta) / m)].
double theorem2_xi_bound(double alpha, double beta, std::size_t depth, std::size_t m, std::size_t n,
                         std::size_t q, const CovarianceSpectrum& spec, double theta_star_norm,
                         double delta, double c = 1.0, double b = 1.0);

/// c ((eps d ||Theta*||^2 + q k ln(q/delta)) / n + n q ln(q/delta) / d).
double corollary_spike_bound(std::size_t k, double eps, std::size_t d, std::size_t n, std::size_t q,
                             double delta, double theta_star_norm, double c = 1.0);

/// (c s_k / n) [||Theta_perp(0)|| + L Lambda^2 G int sqrt(L) dt]^2 with
/// G = sqrt(lambda_1 n), or the realized ||X||_op when `x_op` is given. The
/// integral is the trace's final value plus trace.sqrt_loss_tail. Returns 0
/// when ||Theta_perp(0)|| = 0. Throws DomainError on a non-converged trace
/// or infinite k.
double trajectory_xi_bound(const TrainTrace& trace, double theta_perp0_norm, std::size_t depth,
                         double lambda, const CovarianceSpectrum& spec, std::size_t n,
                         std::optional<double> x_op = std::nullopt, double c = 1.0, double b = 1.0);

}  // namespace benign
