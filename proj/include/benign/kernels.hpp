#pragma once

// Data-parallel inner loops used by the trainer, the operator-norm monitor and
// the ReLU network. Every kernel has a scalar reference implementation and ISA
// variants (AVX2+FMA on x86-64, NEON on aarch64) picked once at startup.
//
// All matrices are column-major, densely packed (leading dimension = rows),
// which is the Eigen default layout.

#include <cstddef>
#include <span>
#include <string_view>

#include "benign/common.hpp"

namespace benign::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Function table for one instruction set. Raw pointers keep the table ABI
/// trivial; callers normally go through the span/Eigen wrappers below.
struct Table {
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // sum_i x[i]^2
    double (*sum_squares)(const double* x, std::size_t n);
    // C (n x q) = B^T * At, with At (k x q) and B (k x n).
    void (*mul_tn)(const double* at, std::size_t k, std::size_t q,
                   const double* b, std::size_t n, double* c);
    // C (r x q) = A (r x k) * V (k x q).
    void (*mul_nn_skinny)(const double* a, std::size_t r, std::size_t k,
                          const double* v, std::size_t q, double* c);
    // A (r x c) += s * U (r x q) * V (c x q)^T.
    void (*add_outer)(double* a, std::size_t r, std::size_t c,
                      const double* u, const double* v, std::size_t q, double s);
    // x[i] = max(x[i], 0)
    void (*relu)(double* x, std::size_t n);
    // g[i] = pre[i] > 0 ? g[i] : 0
    void (*relu_backward)(const double* pre, double* g, std::size_t n);
};

const Table& table(Isa isa);
bool available(Isa isa);

/// Best ISA available on this CPU, unless overridden through the
/// BENIGN_SIMD environment variable ("scalar", "avx2", "neon").
Isa detect();

/// ISA used by the wrappers below.
Isa active_isa();
const Table& active();

/// Switch the ISA used by the wrappers (tests and benchmarks). Throws
/// DomainError when the ISA is not available on this CPU/build.
void set_active(Isa isa);

// ---- span / Eigen wrappers -------------------------------------------------

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
double sum_squares(std::span<const double> x);

/// Returns B^T * At; B is k x n, At is k x q.
Mat mul_tn(const Mat& at, const Mat& b);
/// Returns A * V where V has few columns.
Mat mul_nn_skinny(const Mat& a, const Mat& v);
/// A += s * U * V^T.
void add_outer(Mat& a, const Mat& u, const Mat& v, double s);
void relu(Mat& x);
void relu_backward(const Mat& pre, Mat& g);

}  // namespace benign::kernels
