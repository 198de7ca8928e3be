#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

#include "benign/common.hpp"

namespace benign {

/// Eigenvalues of a covariance matrix, sorted non-increasing, all >= 0.
class CovarianceSpectrum {
public:
    /// Throws DomainError unless the values are finite, non-negative and
    /// sorted non-increasing.
    explicit CovarianceSpectrum(std::vector<double> eigenvalues);

    std::size_t dim() const { return eigenvalues_.size(); }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    double operator[](std::size_t i) const { return eigenvalues_[i]; }
    double largest() const { return eigenvalues_.empty() ? 0.0 : eigenvalues_.front(); }

    /// Eigenvalues as an Eigen vector (for diag(Sigma) arithmetic).
    Vec as_vector() const;

    bool operator==(const CovarianceSpectrum&) const = default;

private:
    std::vector<double> eigenvalues_;
};

/// Tail statistics after cutting the first `j` eigenvalues (0-based cut).
struct RankStats {
    std::size_t j = 0;
    double tail_sum = 0.0;         // s_j = sum_{i>j} lambda_i
    double tail_square_sum = 0.0;  // sum_{i>j} lambda_i^2
    double r = 0.0;                // s_j / lambda_{j+1}
    double big_r = 0.0;            // s_j^2 / sum_{i>j} lambda_i^2
};

/// s_j; 0 <= j <= d, s_d = 0. Compensated summation.
double tail_sum(const CovarianceSpectrum& spec, std::size_t j);

/// r_j and R_j; requires j < d and lambda_{j+1} > 0.
RankStats effective_ranks(const CovarianceSpectrum& spec, std::size_t j);

/// Smallest j with r_j >= b n; std::nullopt stands for "infinite" (the
/// minimum of the empty set).
std::optional<std::size_t> critical_index(const CovarianceSpectrum& spec, double b, std::size_t n);

/// k leading ones followed by d - k copies of eps.
CovarianceSpectrum spike_spectrum(std::size_t k, double eps, std::size_t d);

/// JSON: either an explicit array of eigenvalues or {"k":..,"eps":..,"d":..}.
CovarianceSpectrum spectrum_from_json(const nlohmann::json& j);
nlohmann::json spectrum_to_json(const CovarianceSpectrum& spec);

}  // namespace benign
