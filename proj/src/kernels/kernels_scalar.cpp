#include "kernels_impl.hpp"

#include <algorithm>

namespace benign::kernels::detail {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_squares(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void mul_tn(const double* at, std::size_t k, std::size_t q, const double* b,
            std::size_t n, double* c) {
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        for (std::size_t i = 0; i < q; ++i) c[j + i * n] = dot(bj, at + i * k, k);
    }
}

void mul_nn_skinny(const double* a, std::size_t r, std::size_t k, const double* v,
                   std::size_t q, double* c) {
    std::fill(c, c + r * q, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double* aj = a + j * r;
        for (std::size_t i = 0; i < q; ++i) axpy(v[j + i * k], aj, c + i * r, r);
    }
}

void add_outer(double* a, std::size_t r, std::size_t c, const double* u,
               const double* v, std::size_t q, double s) {
    for (std::size_t j = 0; j < c; ++j) {
        double* aj = a + j * r;
        for (std::size_t i = 0; i < q; ++i) axpy(s * v[j + i * c], u + i * r, aj, r);
    }
}

void relu(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* pre, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
}

}  // namespace

const Table& scalar_table() {
    static const Table t{dot, axpy, sum_squares, mul_tn, mul_nn_skinny, add_outer, relu,
                         relu_backward};
    return t;
}

}  // namespace benign::kernels::detail
