#pragma once

#include <cstddef>
#include <memory>

#include "benign/common.hpp"

namespace benign {

/// Power-iteration settings for operator norms.
struct PowerIterationOptions {
    double tolerance = 1e-10;       // relative change of the estimate
    std::size_t max_iterations = 10'000;
};

/// Largest singular value of `a` by power iteration on a^T a.
///
/// `warm_start`, when non-null and of matching length (a.cols()), seeds the
/// iteration and receives the final right singular vector, so repeated calls
/// on a slowly changing matrix converge in a few steps.
double operator_norm(const Mat& a, Vec* warm_start = nullptr,
                     const PowerIterationOptions& opts = {});

/// Smallest singular value of a wide or square matrix (n <= d): square root of
/// the smallest eigenvalue of a a^T.
double sigma_min_wide(const Mat& a);

/// Factorization of X X^T for a wide data matrix X (n x d, rank n).
///
/// All (XX^T)^{-1} applications go through the Cholesky factor; the explicit
/// inverse is never formed. Construction fails with SingularError when XX^T is
/// rank deficient or its condition number exceeds `max_condition`.
class RowSpace {
public:
    explicit RowSpace(const Mat& x, double max_condition = 1e12);

    std::size_t samples() const { return static_cast<std::size_t>(x_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
    const Mat& data() const { return x_; }
    double condition() const { return condition_; }
    double min_eigenvalue() const { return min_eig_; }
    double max_eigenvalue() const { return max_eig_; }

    /// (XX^T)^{-1} b.
    Mat solve(const Mat& b) const;
    /// X^T (XX^T)^{-1} b, i.e. the minimum-norm preimage of b (d x k).
    Mat lift(const Mat& b) const;
    /// P_X m for a d x k matrix m.
    Mat project(const Mat& m) const;
    /// (I - P_X) m for a d x k matrix m.
    Mat project_out(const Mat& m) const;
    /// m (I - P_X) for a k x d matrix m.
    Mat project_out_rows(const Mat& m) const;
    /// Dense d x d projector.
    Mat projector() const;

private:
    Mat x_;
    Eigen::LLT<Mat> llt_;
    double condition_ = 0.0;
    double min_eig_ = 0.0;
    double max_eig_ = 0.0;
};

/// Neumaier-compensated sum.
class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace benign
