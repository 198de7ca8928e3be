#include "benign/spectrum.hpp"

#include <cmath>
#include <string>

#include "benign/linalg.hpp"

namespace benign {

CovarianceSpectrum::CovarianceSpectrum(std::vector<double> eigenvalues)
    : eigenvalues_(std::move(eigenvalues)) {
    for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
        const double v = eigenvalues_[i];
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("eigenvalue " + std::to_string(i) + " is negative or not finite");
        if (i > 0 && v > eigenvalues_[i - 1])
            throw DomainError("eigenvalues must be sorted non-increasing (index " +
                              std::to_string(i) + ")");
    }
}

Vec CovarianceSpectrum::as_vector() const {
    return Eigen::Map<const Vec>(eigenvalues_.data(), static_cast<Eigen::Index>(eigenvalues_.size()));
}

double tail_sum(const CovarianceSpectrum& spec, std::size_t j) {
    if (j > spec.dim())
        throw DomainError("tail_sum: cut " + std::to_string(j) + " exceeds dimension " +
                          std::to_string(spec.dim()));
    CompensatedSum acc;
    for (std::size_t i = j; i < spec.dim(); ++i) acc.add(spec[i]);
    return acc.value();
}

RankStats effective_ranks(const CovarianceSpectrum& spec, std::size_t j) {
    if (j >= spec.dim())
        throw DomainError("effective_ranks: cut " + std::to_string(j) + " must be below dimension " +
                          std::to_string(spec.dim()));
    if (!(spec[j] > 0.0))
        throw DomainError("effective_ranks: lambda_{j+1} is zero, r_j undefined");
    RankStats out;
    out.j = j;
    CompensatedSum s, s2;
    for (std::size_t i = j; i < spec.dim(); ++i) {
        s.add(spec[i]);
        s2.add(spec[i] * spec[i]);
    }
    out.tail_sum = s.value();
    out.tail_square_sum = s2.value();
    if (!(out.tail_square_sum > 0.0))
        throw DomainError("effective_ranks: tail square sum underflows to zero");
    out.r = out.tail_sum / spec[j];
    out.big_r = out.tail_sum * out.tail_sum / out.tail_square_sum;
    return out;
}

std::optional<std::size_t> critical_index(const CovarianceSpectrum& spec, double b, std::size_t n) {
    if (!(b > 0.0)) throw DomainError("critical_index: b must be positive");
    if (n < 1) throw DomainError("critical_index: n must be at least 1");
    const std::size_t d = spec.dim();
    // Suffix sums, accumulated from the small end.
    std::vector<double> suffix(d + 1, 0.0);
    CompensatedSum acc;
    for (std::size_t i = d; i-- > 0;) {
        acc.add(spec[i]);
        suffix[i] = acc.value();
    }
    const double threshold = b * static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        if (!(spec[j] > 0.0)) break;  // r_j undefined from here on
        if (suffix[j] / spec[j] >= threshold) return j;
    }
    return std::nullopt;
}

CovarianceSpectrum spike_spectrum(std::size_t k, double eps, std::size_t d) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("spike_spectrum: eps must lie in (0, 1)");
    if (k > d) throw DomainError("spike_spectrum: k exceeds d");
    std::vector<double> values(d, eps);
    std::fill(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), 1.0);
    return CovarianceSpectrum(std::move(values));
}

CovarianceSpectrum spectrum_from_json(const nlohmann::json& j) {
    try {
        if (j.is_array()) return CovarianceSpectrum(j.get<std::vector<double>>());
        if (j.is_object() && j.contains("k") && j.contains("eps") && j.contains("d"))
            return spike_spectrum(j.at("k").get<std::size_t>(), j.at("eps").get<double>(),
                                  j.at("d").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("spectrum: ") + e.what());
    }
    throw IoError("spectrum must be an array of eigenvalues or {k, eps, d}");
}

nlohmann::json spectrum_to_json(const CovarianceSpectrum& spec) {
    return nlohmann::json(spec.eigenvalues());
}

}  // namespace benign
