#include <doctest.h>

#include <cmath>

#include "benign/spectrum.hpp"

using namespace benign;

TEST_SUITE("spectrum") {

TEST_CASE("constructor rejects unsorted, negative and non-finite values") {
    CHECK_THROWS_AS(CovarianceSpectrum({1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(CovarianceSpectrum({1.0, -0.1}), DomainError);
    CHECK_THROWS_AS(CovarianceSpectrum({NAN}), DomainError);
    CHECK_NOTHROW(CovarianceSpectrum({2.0, 2.0, 0.0}));
}

TEST_CASE("tail_sum") {
    const CovarianceSpectrum ones(std::vector<double>(5, 1.0));
    CHECK(tail_sum(ones, 2) == 3.0);
    CHECK(tail_sum(ones, 5) == 0.0);
    CHECK_THROWS_AS(tail_sum(ones, 6), DomainError);
    // 10 * 1 + 990 * 0.01
    CHECK(tail_sum(spike_spectrum(10, 0.01, 1000), 0) == doctest::Approx(19.9).epsilon(1e-14));
}

TEST_CASE("effective ranks") {
    const CovarianceSpectrum ones(std::vector<double>(5, 1.0));
    const auto r0 = effective_ranks(ones, 0);
    CHECK(r0.r == 5.0);
    CHECK(r0.big_r == 5.0);

    const auto spike = spike_spectrum(10, 0.01, 1000);
    // s_9 = 1 + 990 * 0.01, lambda_10 = 1
    CHECK(effective_ranks(spike, 9).r == doctest::Approx(10.9).epsilon(1e-13));
    const auto at_k = effective_ranks(spike, 10);
    CHECK(at_k.r == doctest::Approx(990.0).epsilon(1e-13));
    CHECK(at_k.big_r == doctest::Approx(990.0).epsilon(1e-13));

    CHECK_THROWS_AS(effective_ranks(ones, 5), DomainError);
    CHECK_THROWS_AS(effective_ranks(CovarianceSpectrum({1.0, 0.0}), 1), DomainError);
}

TEST_CASE("R_j never exceeds the tail length") {
    const CovarianceSpectrum spec({5.0, 3.0, 3.0, 1.0, 0.5, 0.5, 0.1});
    for (std::size_t j = 0; j < spec.dim(); ++j) {
        const auto s = effective_ranks(spec, j);
        CHECK(s.big_r <= static_cast<double>(spec.dim() - j) + 1e-12);
        CHECK(s.r >= 1.0);
    }
}

TEST_CASE("critical index") {
    CHECK(critical_index(CovarianceSpectrum(std::vector<double>(1000, 1.0)), 1.0, 100) == std::optional<std::size_t>(0));
    // r_9 = 10.9 < 100, r_10 = 990 >= 100
    CHECK(critical_index(spike_spectrum(10, 0.01, 1000), 1.0, 100) == std::optional<std::size_t>(10));
    CHECK_FALSE(critical_index(CovarianceSpectrum(std::vector<double>(50, 1.0)), 1.0, 100).has_value());
    CHECK_THROWS_AS(critical_index(spike_spectrum(1, 0.5, 4), 0.0, 1), DomainError);
}

TEST_CASE("critical index is monotone in b and n") {
    const auto spec = spike_spectrum(20, 0.05, 800);
    auto key = [](std::optional<std::size_t> k) { return k.value_or(SIZE_MAX); };
    for (std::size_t n = 1; n < 60; ++n)
        for (double b : {0.25, 0.5, 1.0, 2.0}) {
            CHECK(key(critical_index(spec, b, n + 1)) >= key(critical_index(spec, b, n)));
            CHECK(key(critical_index(spec, 2 * b, n)) >= key(critical_index(spec, b, n)));
        }
}

TEST_CASE("spike spectrum") {
    CHECK(spike_spectrum(0, 0.5, 3).eigenvalues() == std::vector<double>{0.5, 0.5, 0.5});
    CHECK(spike_spectrum(4, 0.5, 4).eigenvalues() == std::vector<double>(4, 1.0));
    const auto s = spike_spectrum(10, 0.01, 1000);
    CHECK(s[9] == 1.0);
    CHECK(s[10] == 0.01);
    CHECK(s[999] == 0.01);
    CHECK_THROWS_AS(spike_spectrum(1, 0.0, 3), DomainError);
    CHECK_THROWS_AS(spike_spectrum(1, 1.0, 3), DomainError);
    CHECK_THROWS_AS(spike_spectrum(4, 0.5, 3), DomainError);
}

TEST_CASE("spike rank identities on a parameter grid") {
    for (std::size_t k : {1, 5, 17})
        for (double eps : {0.001, 0.2, 0.9})
            for (std::size_t d : {30, 333, 2000}) {
                const auto spec = spike_spectrum(k, eps, d);
                const double tail = static_cast<double>(d - k);
                CHECK(tail_sum(spec, k) == doctest::Approx(eps * tail).epsilon(1e-12));
                CHECK(effective_ranks(spec, k).big_r == doctest::Approx(tail).epsilon(1e-12));
                CHECK(effective_ranks(spec, 0).r == doctest::Approx(k + eps * tail).epsilon(1e-12));
                for (std::size_t j = 0; j < k; ++j) CHECK(effective_ranks(spec, j).r <= k + eps * d + 1e-9);
            }
}

TEST_CASE("JSON round trip") {
    const auto s = spike_spectrum(3, 0.25, 7);
    CHECK(spectrum_from_json(spectrum_to_json(s)) == s);
    CHECK(spectrum_from_json(nlohmann::json{{"k", 3}, {"eps", 0.25}, {"d", 7}}) == s);
    CHECK(spectrum_from_json(nlohmann::json::array({2.0, 1.0})).eigenvalues() == std::vector<double>{2.0, 1.0});
    CHECK_THROWS(spectrum_from_json(nlohmann::json::array({1.0, 2.0})));
}

}
