#include "kernels_impl.hpp"

#include <arm_neon.h>

#include <algorithm>

namespace benign::kernels::detail {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
    float64x2_t a0 = vdupq_n_f64(0.0), a1 = vdupq_n_f64(0.0);
    float64x2_t a2 = vdupq_n_f64(0.0), a3 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = vfmaq_f64(a0, vld1q_f64(x + i), vld1q_f64(y + i));
        a1 = vfmaq_f64(a1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
        a2 = vfmaq_f64(a2, vld1q_f64(x + i + 4), vld1q_f64(y + i + 4));
        a3 = vfmaq_f64(a3, vld1q_f64(x + i + 6), vld1q_f64(y + i + 6));
    }
    for (; i + 2 <= n; i += 2) a0 = vfmaq_f64(a0, vld1q_f64(x + i), vld1q_f64(y + i));
    double acc = vaddvq_f64(vaddq_f64(vaddq_f64(a0, a1), vaddq_f64(a2, a3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

void mul_tn(const double* at, std::size_t k, std::size_t q, const double* b,
            std::size_t n, double* c) {
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < q; ++i) c[j + i * n] = dot(b + j * k, at + i * k, k);
}

void mul_nn_skinny(const double* a, std::size_t r, std::size_t k, const double* v,
                   std::size_t q, double* c) {
    std::fill(c, c + r * q, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < q; ++i) axpy(v[j + i * k], a + j * r, c + i * r, r);
}

void add_outer(double* a, std::size_t r, std::size_t c, const double* u,
               const double* v, std::size_t q, double s) {
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t i = 0; i < q; ++i) axpy(s * v[j + i * c], u + i * r, a + j * r, r);
}

void relu(double* x, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        vst1q_f64(x + i, vbslq_f64(vcgtq_f64(v, zero), v, zero));
    }
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* pre, double* g, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(g + i, vbslq_f64(vcgtq_f64(vld1q_f64(pre + i), zero), vld1q_f64(g + i), zero));
    for (; i < n; ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
}

}  // namespace

const Table& neon_table() {
    static const Table t{dot, axpy, sum_squares, mul_tn, mul_nn_skinny, add_outer, relu,
                         relu_backward};
    return t;
}

}  // namespace benign::kernels::detail
