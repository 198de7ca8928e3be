#include "benign/linalg.hpp"

#include <cmath>

#include "benign/kernels.hpp"

namespace benign {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void CompensatedSum::add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
        comp_ += (sum_ - t) + v;
    else
        comp_ += (v - t) + sum_;
    sum_ = t;
}

double operator_norm(const Mat& a, Vec* warm_start, const PowerIterationOptions& opts) {
    if (a.size() == 0) return 0.0;
    const double fro = a.norm();
    if (fro == 0.0) return 0.0;

    Mat v(a.cols(), 1);
    if (warm_start != nullptr && warm_start->size() == a.cols() && warm_start->norm() > 0.0)
        v.col(0) = *warm_start;
    else {
        // Fixed-seed Gaussian start: deterministic, and almost surely not
        // orthogonal to the top singular vector.
        Rng rng(0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal;
        for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, 0) = normal(rng);
    }
    v /= v.norm();

    double estimate = 0.0;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        const Mat av = kernels::mul_nn_skinny(a, v);  // a v
        const double norm_av = av.norm();
        if (norm_av == 0.0) {
            // Start vector in the null space: restart from the row of a with the
            // largest norm.
            Eigen::Index row = 0;
            a.rowwise().squaredNorm().maxCoeff(&row);
            v = a.row(row).transpose();
            v /= v.norm();
            continue;
        }
        Mat w = kernels::mul_tn(av, a);  // a^T (a v)
        const double next = std::sqrt(w.norm());
        v = w / w.norm();
        const bool done = std::abs(next - estimate) <= opts.tolerance * next;
        estimate = next;
        if (done) break;
    }
    // The Rayleigh-quotient route: ||a v|| for the final unit v.
    const double final_estimate = kernels::mul_nn_skinny(a, v).norm();
    if (warm_start != nullptr) *warm_start = v.col(0);
    return std::max(estimate, final_estimate);
}

double sigma_min_wide(const Mat& a) {
    require_shape(a.rows() <= a.cols(), "sigma_min_wide: expects rows <= cols");
    Eigen::SelfAdjointEigenSolver<Mat> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
}

RowSpace::RowSpace(const Mat& x, double max_condition) : x_(x) {
    require_shape(x.rows() >= 1 && x.cols() >= 1, "RowSpace: empty data matrix");
    const Mat gram = x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
    min_eig_ = eig.eigenvalues()(0);
    max_eig_ = eig.eigenvalues()(eig.eigenvalues().size() - 1);
    if (!(min_eig_ > 0.0) || !(max_eig_ > 0.0))
        throw SingularError("XX^T is singular (rank < n)");
    condition_ = max_eig_ / min_eig_;
    if (!(condition_ <= max_condition))
        throw SingularError("XX^T condition number " + std::to_string(condition_) +
                            " exceeds limit");
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success) throw SingularError("Cholesky factorization of XX^T failed");
}

Mat RowSpace::solve(const Mat& b) const {
    require_shape(b.rows() == x_.rows(), "RowSpace::solve: row mismatch");
    return llt_.solve(b);
}

Mat RowSpace::lift(const Mat& b) const { return x_.transpose() * solve(b); }

Mat RowSpace::project(const Mat& m) const {
    require_shape(m.rows() == x_.cols(), "RowSpace::project: row mismatch");
    return lift(x_ * m);
}

Mat RowSpace::project_out(const Mat& m) const { return m - project(m); }

Mat RowSpace::project_out_rows(const Mat& m) const {
    require_shape(m.cols() == x_.cols(), "RowSpace::project_out_rows: column mismatch");
    // m X^T (XX^T)^{-1} X, computed as ((XX^T)^{-1} X m^T)^T.
    const Mat coeff = solve(x_ * m.transpose());  // n x k
    return m - coeff.transpose() * x_;
}

Mat RowSpace::projector() const { return lift(x_); }

}  // namespace benign
