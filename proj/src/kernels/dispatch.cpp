#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace benign::kernels {
namespace {

Isa best_available() {
#if defined(BENIGN_HAVE_AVX2)
    if (available(Isa::avx2)) return Isa::avx2;
#endif
#if defined(BENIGN_HAVE_NEON)
    return Isa::neon;
#endif
    return Isa::scalar;
}

std::atomic<Isa>& active_slot() {
    static std::atomic<Isa> slot{detect()};
    return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool available(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(BENIGN_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(BENIGN_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Table& table(Isa isa) {
    if (!available(isa))
        throw DomainError("SIMD variant not available: " + std::string(isa_name(isa)));
    switch (isa) {
#if defined(BENIGN_HAVE_AVX2)
        case Isa::avx2: return detail::avx2_table();
#endif
#if defined(BENIGN_HAVE_NEON)
        case Isa::neon: return detail::neon_table();
#endif
        default: return detail::scalar_table();
    }
}

Isa detect() {
    if (const char* env = std::getenv("BENIGN_SIMD")) {
        const std::string want(env);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
            if (want == isa_name(isa) && available(isa)) return isa;
    }
    return best_available();
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

const Table& active() { return table(active_isa()); }

void set_active(Isa isa) {
    (void)table(isa);
    active_slot().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> x, std::span<const double> y) {
    require_shape(x.size() == y.size(), "dot: length mismatch");
    return active().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    require_shape(x.size() == y.size(), "axpy: length mismatch");
    active().axpy(a, x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) { return active().sum_squares(x.data(), x.size()); }

Mat mul_tn(const Mat& at, const Mat& b) {
    require_shape(at.rows() == b.rows(), "mul_tn: inner dimensions differ");
    Mat c(b.cols(), at.cols());
    if (c.size() == 0) return c;
    active().mul_tn(at.data(), static_cast<std::size_t>(at.rows()), static_cast<std::size_t>(at.cols()),
                    b.data(), static_cast<std::size_t>(b.cols()), c.data());
    return c;
}

Mat mul_nn_skinny(const Mat& a, const Mat& v) {
    require_shape(a.cols() == v.rows(), "mul_nn_skinny: inner dimensions differ");
    Mat c(a.rows(), v.cols());
    if (c.size() == 0) return c;
    active().mul_nn_skinny(a.data(), static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()),
                           v.data(), static_cast<std::size_t>(v.cols()), c.data());
    return c;
}

void add_outer(Mat& a, const Mat& u, const Mat& v, double s) {
    require_shape(u.rows() == a.rows() && v.rows() == a.cols() && u.cols() == v.cols(),
                  "add_outer: shapes do not compose");
    if (a.size() == 0) return;
    active().add_outer(a.data(), static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()),
                       u.data(), v.data(), static_cast<std::size_t>(u.cols()), s);
}

void relu(Mat& x) { active().relu(x.data(), static_cast<std::size_t>(x.size())); }

void relu_backward(const Mat& pre, Mat& g) {
    require_shape(pre.rows() == g.rows() && pre.cols() == g.cols(), "relu_backward: shape mismatch");
    active().relu_backward(pre.data(), g.data(), static_cast<std::size_t>(g.size()));
}

}  // namespace benign::kernels
