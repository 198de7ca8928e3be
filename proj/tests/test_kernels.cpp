#include <doctest.h>

#include <random>
#include <vector>

#include "benign/kernels.hpp"

using namespace benign;
namespace k = benign::kernels;

namespace {

std::vector<double> randv(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
}

std::vector<k::Isa> simd_variants() {
    std::vector<k::Isa> out;
    for (k::Isa isa : {k::Isa::avx2, k::Isa::neon})
        if (k::available(isa)) out.push_back(isa);
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar reference against naive loops") {
    std::mt19937_64 rng(3);
    const auto& s = k::table(k::Isa::scalar);
    const auto x = randv(37, rng), y = randv(37, rng);
    double dot = 0, ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i], ss += x[i] * x[i];
    CHECK(s.dot(x.data(), y.data(), x.size()) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(s.sum_squares(x.data(), x.size()) == doctest::Approx(ss).epsilon(1e-14));

    // mul_tn: C (n x q) = B^T At
    const std::size_t kk = 9, q = 3, n = 7;
    const auto at = randv(kk * q, rng), b = randv(kk * n, rng);
    std::vector<double> c(n * q);
    s.mul_tn(at.data(), kk, q, b.data(), n, c.data());
    const Mat want = Eigen::Map<const Mat>(b.data(), kk, n).transpose() * Eigen::Map<const Mat>(at.data(), kk, q);
    CHECK((Eigen::Map<const Mat>(c.data(), n, q) - want).norm() < 1e-12);
}

TEST_CASE("SIMD variants agree with the scalar reference") {
    const auto variants = simd_variants();
    if (variants.empty()) {
        MESSAGE("no SIMD variant on this CPU; only the scalar path is exercised");
        return;
    }
    std::mt19937_64 rng(11);
    const auto& ref = k::table(k::Isa::scalar);
    for (k::Isa isa : variants) {
        CAPTURE(k::isa_name(isa));
        const auto& t = k::table(isa);
        for (std::size_t n : {0, 1, 3, 4, 5, 8, 15, 16, 17, 63, 1000}) {
            CAPTURE(n);
            const auto x = randv(n, rng), y = randv(n, rng);
            CHECK(t.dot(x.data(), y.data(), n) == doctest::Approx(ref.dot(x.data(), y.data(), n)).epsilon(1e-12));
            CHECK(t.sum_squares(x.data(), n) == doctest::Approx(ref.sum_squares(x.data(), n)).epsilon(1e-12));
            auto ya = y, yb = y;
            t.axpy(0.7, x.data(), ya.data(), n);
            ref.axpy(0.7, x.data(), yb.data(), n);
            CHECK(max_abs_diff(ya, yb) < 1e-14);
            auto ra = x, rb = x;
            t.relu(ra.data(), n);
            ref.relu(rb.data(), n);
            CHECK(ra == rb);
            auto ga = y, gb = y;
            t.relu_backward(x.data(), ga.data(), n);
            ref.relu_backward(x.data(), gb.data(), n);
            CHECK(ga == gb);
        }
        for (auto [r, kk, q] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {5, 7, 3}, {33, 17, 2},
                                {130, 103, 3}, {8, 64, 4}}) {
            CAPTURE(r);
            CAPTURE(kk);
            const auto at = randv(kk * q, rng), b = randv(kk * r, rng), a = randv(r * kk, rng), v = randv(kk * q, rng);
            std::vector<double> c1(r * q), c2(r * q);
            t.mul_tn(at.data(), kk, q, b.data(), r, c1.data());
            ref.mul_tn(at.data(), kk, q, b.data(), r, c2.data());
            CHECK(max_abs_diff(c1, c2) < 1e-12);
            t.mul_nn_skinny(a.data(), r, kk, v.data(), q, c1.data());
            ref.mul_nn_skinny(a.data(), r, kk, v.data(), q, c2.data());
            CHECK(max_abs_diff(c1, c2) < 1e-12);
            const auto u = randv(r * q, rng), w = randv(kk * q, rng);
            auto m1 = a, m2 = a;
            t.add_outer(m1.data(), r, kk, u.data(), w.data(), q, -0.3);
            ref.add_outer(m2.data(), r, kk, u.data(), w.data(), q, -0.3);
            CHECK(max_abs_diff(m1, m2) < 1e-12);
        }
    }
}

TEST_CASE("Eigen wrappers follow the documented products") {
    std::mt19937_64 rng(5);
    Mat at = Mat::Random(6, 2), b = Mat::Random(6, 4), a = Mat::Random(4, 6), v = Mat::Random(6, 2);
    CHECK((k::mul_tn(at, b) - b.transpose() * at).norm() < 1e-13);
    CHECK((k::mul_nn_skinny(a, v) - a * v).norm() < 1e-13);
    Mat acc = a;
    const Mat u = Mat::Random(4, 2);
    k::add_outer(acc, u, v, 2.5);
    CHECK((acc - (a + 2.5 * u * v.transpose())).norm() < 1e-13);
    CHECK_THROWS_AS(k::mul_tn(at, Mat::Random(5, 4)), ShapeError);
}

TEST_CASE("active ISA can be switched to scalar and back") {
    const k::Isa before = k::active_isa();
    k::set_active(k::Isa::scalar);
    CHECK(k::active_isa() == k::Isa::scalar);
    k::set_active(before);
    CHECK(k::active_isa() == before);
    for (k::Isa isa : {k::Isa::avx2, k::Isa::neon})
        if (!k::available(isa)) CHECK_THROWS_AS(k::set_active(isa), DomainError);
}

}
