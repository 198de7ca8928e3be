#include "kernels_impl.hpp"

#include <immintrin.h>

#include <algorithm>

namespace benign::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), a3);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double acc = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

// Q columns of At against one column of B, sharing the B loads.
template <int Q>
void dot_block(const double* at, std::size_t k, const double* bj, double* out,
               std::size_t stride) {
    __m256d acc[Q];
    for (int i = 0; i < Q; ++i) acc[i] = _mm256_setzero_pd();
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
        const __m256d bv = _mm256_loadu_pd(bj + p);
        for (int i = 0; i < Q; ++i)
            acc[i] = _mm256_fmadd_pd(_mm256_loadu_pd(at + i * k + p), bv, acc[i]);
    }
    for (int i = 0; i < Q; ++i) {
        double s = hsum(acc[i]);
        for (std::size_t t = p; t < k; ++t) s += at[i * k + t] * bj[t];
        out[i * stride] = s;
    }
}

void mul_tn(const double* at, std::size_t k, std::size_t q, const double* b,
            std::size_t n, double* c) {
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        std::size_t i = 0;
        for (; i + 4 <= q; i += 4) dot_block<4>(at + i * k, k, bj, c + j + i * n, n);
        switch (q - i) {
            case 3: dot_block<3>(at + i * k, k, bj, c + j + i * n, n); break;
            case 2: dot_block<2>(at + i * k, k, bj, c + j + i * n, n); break;
            case 1: dot_block<1>(at + i * k, k, bj, c + j + i * n, n); break;
            default: break;
        }
    }
}

// dst_i += coef_i * src for Q destination columns (stride r).
template <int Q>
void multi_axpy(const double* coef, const double* src, double* dst, std::size_t r) {
    __m256d cv[Q];
    for (int i = 0; i < Q; ++i) cv[i] = _mm256_set1_pd(coef[i]);
    std::size_t p = 0;
    for (; p + 4 <= r; p += 4) {
        const __m256d sv = _mm256_loadu_pd(src + p);
        for (int i = 0; i < Q; ++i) {
            double* d = dst + i * r + p;
            _mm256_storeu_pd(d, _mm256_fmadd_pd(cv[i], sv, _mm256_loadu_pd(d)));
        }
    }
    for (; p < r; ++p)
        for (int i = 0; i < Q; ++i) dst[i * r + p] += coef[i] * src[p];
}

void mul_nn_skinny(const double* a, std::size_t r, std::size_t k, const double* v,
                   std::size_t q, double* c) {
    std::fill(c, c + r * q, 0.0);
    double coef[4];
    for (std::size_t j = 0; j < k; ++j) {
        const double* aj = a + j * r;
        std::size_t i = 0;
        for (; i < q; i += 4) {
            const std::size_t w = std::min<std::size_t>(4, q - i);
            for (std::size_t t = 0; t < w; ++t) coef[t] = v[j + (i + t) * k];
            switch (w) {
                case 4: multi_axpy<4>(coef, aj, c + i * r, r); break;
                case 3: multi_axpy<3>(coef, aj, c + i * r, r); break;
                case 2: multi_axpy<2>(coef, aj, c + i * r, r); break;
                default: multi_axpy<1>(coef, aj, c + i * r, r); break;
            }
        }
    }
}

// dst += sum_i coef_i * u_i over Q source columns (stride r).
template <int Q>
void gather_axpy(const double* coef, const double* u, double* dst, std::size_t r) {
    __m256d cv[Q];
    for (int i = 0; i < Q; ++i) cv[i] = _mm256_set1_pd(coef[i]);
    std::size_t p = 0;
    for (; p + 4 <= r; p += 4) {
        __m256d d = _mm256_loadu_pd(dst + p);
        for (int i = 0; i < Q; ++i) d = _mm256_fmadd_pd(cv[i], _mm256_loadu_pd(u + i * r + p), d);
        _mm256_storeu_pd(dst + p, d);
    }
    for (; p < r; ++p) {
        double d = dst[p];
        for (int i = 0; i < Q; ++i) d += coef[i] * u[i * r + p];
        dst[p] = d;
    }
}

void add_outer(double* a, std::size_t r, std::size_t c, const double* u,
               const double* v, std::size_t q, double s) {
    double coef[4];
    for (std::size_t j = 0; j < c; ++j) {
        double* aj = a + j * r;
        for (std::size_t i = 0; i < q; i += 4) {
            const std::size_t w = std::min<std::size_t>(4, q - i);
            for (std::size_t t = 0; t < w; ++t) coef[t] = s * v[j + (i + t) * c];
            switch (w) {
                case 4: gather_axpy<4>(coef, u + i * r, aj, r); break;
                case 3: gather_axpy<3>(coef, u + i * r, aj, r); break;
                case 2: gather_axpy<2>(coef, u + i * r, aj, r); break;
                default: gather_axpy<1>(coef, u + i * r, aj, r); break;
            }
        }
    }
}

void relu(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    // max_pd returns the second operand when the first is NaN, matching the
    // scalar `x > 0 ? x : 0`.
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* pre, double* g, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
    }
    for (; i < n; ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
}

}  // namespace

const Table& avx2_table() {
    static const Table t{dot, axpy, sum_squares, mul_tn, mul_nn_skinny, add_outer, relu,
                         relu_backward};
    return t;
}

}  // namespace benign::kernels::detail
