#include "benign/risk.hpp"

#include <cmath>
#include <limits>

#include "benign/csv.hpp"

namespace benign {
namespace {

// Tr(A^T Sigma B) for Sigma = R diag(lambda) R^T.
double sigma_inner(const RegressionTask& task, const Mat& a, const Mat& b) {
    const Vec lambda = task.spectrum.as_vector();
    if (!task.rotation) return (a.transpose() * lambda.asDiagonal() * b).trace();
    const Mat ra = task.rotation->transpose() * a;
    const Mat rb = task.rotation->transpose() * b;
    return (ra.transpose() * lambda.asDiagonal() * rb).trace();
}

std::size_t finite_k(const CovarianceSpectrum& spec, double b, std::size_t n) {
    const auto k = critical_index(spec, b, n);
    if (!k) throw DomainError("critical index k is infinite for this spectrum and n");
    return *k;
}

}  // namespace

Mat row_span_projector(const Mat& x) { return RowSpace(x).projector(); }

Mat min_norm_interpolant(const RowSpace& rows, const Mat& y) { return rows.lift(y); }

Mat min_norm_interpolant(const Mat& x, const Mat& y) {
    require_shape(x.rows() == y.rows(), "min_norm_interpolant: X and Y row counts differ");
    return RowSpace(x).lift(y);
}

SpanDecomposition span_decomposition(const Mat& theta, const Mat& x) {
    require_shape(theta.rows() == x.cols(), "span_decomposition: theta rows must equal d");
    const RowSpace rows(x);
    SpanDecomposition out;
    out.projector = rows.projector();
    out.theta_in_span = rows.project(theta);
    out.theta_out_of_span = theta - out.theta_in_span;
    return out;
}

double exact_excess_risk(const Mat& theta, const Mat& theta_star, const Mat& sigma) {
    require_shape(theta.rows() == theta_star.rows() && theta.cols() == theta_star.cols(),
                  "exact_excess_risk: theta and theta_star shapes differ");
    require_shape(sigma.rows() == theta.rows() && sigma.cols() == theta.rows(),
                  "exact_excess_risk: Sigma must be d x d");
    if ((sigma - sigma.transpose()).norm() > 1e-10 * std::max(1.0, sigma.norm()))
        throw DomainError("exact_excess_risk: Sigma is not symmetric");
    const Mat diff = theta - theta_star;
    return std::max(0.0, (diff.transpose() * sigma * diff).trace());
}

double exact_excess_risk(const Mat& theta, const RegressionTask& task) {
    require_shape(theta.rows() == task.theta_star.rows() && theta.cols() == task.theta_star.cols(),
                  "exact_excess_risk: theta and theta_star shapes differ");
    const Mat diff = theta - task.theta_star;
    return std::max(0.0, sigma_inner(task, diff, diff));
}

MonteCarloEstimate mc_excess_risk(const Mat& theta, const RegressionTask& task, std::size_t samples,
                                  Rng& rng) {
    require_shape(theta.rows() == task.theta_star.rows() && theta.cols() == task.theta_star.cols(),
                  "mc_excess_risk: theta and theta_star shapes differ");
    if (samples < 2) throw DomainError("mc_excess_risk: need at least two samples");
    const Mat diff = theta - task.theta_star;
    constexpr std::size_t batch = 4096;
    CompensatedSum sum, sum_sq;
    for (std::size_t done = 0; done < samples; done += batch) {
        const std::size_t count = std::min(batch, samples - done);
        const Mat xs = sample_covariates(task, count, rng);
        const Vec vals = (xs * diff).rowwise().squaredNorm();
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            sum.add(vals(i));
            sum_sq.add(vals(i) * vals(i));
        }
    }
    const double n = static_cast<double>(samples);
    MonteCarloEstimate est;
    est.samples = samples;
    est.mean = sum.value() / n;
    const double var = std::max(0.0, (sum_sq.value() - n * est.mean * est.mean) / (n - 1));
    est.half_width = 1.96 * std::sqrt(var / n);
    return est;
}

BiasVarianceMatrices bias_variance_matrices(const Mat& x, const Mat& sigma) {
    require_shape(sigma.rows() == x.cols() && sigma.cols() == x.cols(),
                  "bias_variance_matrices: Sigma must be d x d");
    const RowSpace rows(x);
    const Mat proj = rows.projector();
    const Mat comp = Mat::Identity(x.cols(), x.cols()) - proj;
    BiasVarianceMatrices out;
    out.b = comp * sigma * comp;
    const Mat inv_x = rows.solve(x);  // (XX^T)^{-1} X, n x d
    out.c = inv_x * sigma * inv_x.transpose();
    // Symmetrize away rounding.
    out.b = (out.b + out.b.transpose()) / 2;
    out.c = (out.c + out.c.transpose()) / 2;
    return out;
}

double variance_term(const RowSpace& rows, const Mat& omega, const RegressionTask& task) {
    require_shape(omega.rows() == static_cast<Eigen::Index>(rows.samples()),
                  "variance_term: Omega must have n rows");
    const Mat f = rows.lift(omega);
    return std::max(0.0, sigma_inner(task, f, f));
}

RiskReport risk_report(const Mat& theta, const Dataset& ds, const RegressionTask& task,
                       std::size_t mc_n, Rng& rng, const RiskOptions& opts, const RowSpace* rows) {
    require_shape(theta.rows() == static_cast<Eigen::Index>(task.d()) &&
                      theta.cols() == static_cast<Eigen::Index>(task.q()),
                  "risk_report: theta must be d x q");
    if (!theta.allFinite()) throw DomainError("risk_report: theta has non-finite entries");
    std::optional<RowSpace> own;
    if (rows == nullptr) {
        own.emplace(ds.x);
        rows = &*own;
    }
    RiskReport r;
    r.xi_constant = opts.c;
    r.exact_risk = exact_excess_risk(theta, task);
    if (mc_n > 0) {
        const auto mc = mc_excess_risk(theta, task, mc_n, rng);
        r.mc_risk = mc.mean;
        r.mc_half_width = mc.half_width;
        r.mc_samples = mc.samples;
    }
    const Mat theta_perp = rows->project_out(theta);
    const Mat e = rows->project_out(task.theta_star) - theta_perp;
    const Mat f = rows->lift(ds.omega);
    r.bias_term = std::max(0.0, sigma_inner(task, e, e));
    r.variance_term = variance_term(*rows, ds.omega, task);
    r.cross_term = -sigma_inner(task, e, f);
    r.theta_perp_norm = theta_perp.norm();
    r.dist_to_min_norm = (theta - rows->lift(ds.y)).norm();
    r.k = critical_index(task.spectrum, opts.b, ds.n());
    if (r.k) {
        const double s_k = tail_sum(task.spectrum, *r.k);
        r.xi_term = 2.0 * opts.c * s_k / static_cast<double>(ds.n()) * r.theta_perp_norm * r.theta_perp_norm;
    } else {
        r.xi_term = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

nlohmann::json risk_report_to_json(const RiskReport& r) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::json j{{"exact_risk", num(r.exact_risk)},
                     {"mc_risk", num(r.mc_risk)},
                     {"mc_half_width", num(r.mc_half_width)},
                     {"mc_samples", r.mc_samples},
                     {"bias_term", num(r.bias_term)},
                     {"variance_term", num(r.variance_term)},
                     {"cross_term", num(r.cross_term)},
                     {"xi_term", num(r.xi_term)},
                     {"xi_constant", r.xi_constant},
                     {"theta_perp_norm", num(r.theta_perp_norm)},
                     {"dist_to_min_norm", num(r.dist_to_min_norm)}};
    j["k"] = r.k ? nlohmann::json(*r.k) : nlohmann::json("inf");
    return j;
}

void dump_bias_variance_csv(const std::filesystem::path& dir, const BiasVarianceMatrices& m) {
    ensure_directory(dir);
    write_matrix_csv(dir / "B.csv", m.b);
    write_matrix_csv(dir / "C.csv", m.c);
}

double theorem2_xi_bound(double alpha, double beta, std::size_t depth, std::size_t m, std::size_t n,
                         std::size_t q, const CovarianceSpectrum& spec, double theta_star_norm,
                         double delta, double c, double b) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DomainError("theorem2_xi_bound: scales must be non-negative");
    if (depth < 2 || m < 1 || n < 1 || q < 1) throw DomainError("theorem2_xi_bound: L >= 2 and m, n, q >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("theorem2_xi_bound: delta must lie in (0, 1)");
    const std::size_t k = finite_k(spec, b, n);
    const double s_k = tail_sum(spec, k);
    const double s_0 = tail_sum(spec, 0);
    const double l1 = spec.largest();
    const double nn = static_cast<double>(n);
    const double qq = static_cast<double>(q);
    const double ld = static_cast<double>(depth);
    if (alpha == 0.0) return 0.0;
    const double a4 = std::pow(alpha + 1.0 / ld, 4);
    const double inner = l1 * theta_star_norm * theta_star_norm + qq +
                         alpha * alpha * beta * beta * s_0 * qq * std::log(nn / delta) / static_cast<double>(m);
    const double bracket = qq * beta * beta + ld * ld * a4 * l1 * nn * nn / (s_k * s_k) * inner;
    return c * alpha * alpha * s_k / nn * bracket;
}

double corollary_spike_bound(std::size_t k, double eps, std::size_t d, std::size_t n, std::size_t q,
                             double delta, double theta_star_norm, double c) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("corollary_spike_bound: eps must lie in (0, 1)");
    if (n < 1 || q < 1) throw DomainError("corollary_spike_bound: n, q must be positive");
    if (d < n) throw DomainError("corollary_spike_bound: requires d >= n");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("corollary_spike_bound: delta must lie in (0, 1)");
    const double nn = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    const double qq = static_cast<double>(q);
    const double lg = std::log(qq / delta);
    return c * ((eps * dd * theta_star_norm * theta_star_norm + qq * static_cast<double>(k) * lg) / nn +
                nn * qq * lg / dd);
}

double trajectory_xi_bound(const TrainTrace& trace, double theta_perp0_norm, std::size_t depth,
                         double lambda, const CovarianceSpectrum& spec, std::size_t n,
                         std::optional<double> x_op, double c, double b) {
    if (!trace.converged || trace.size() == 0)
        throw DomainError("trajectory_xi_bound: trace did not converge");
    const std::size_t k = finite_k(spec, b, n);
    if (theta_perp0_norm == 0.0) return 0.0;
    const double nn = static_cast<double>(n);
    const double s_k = tail_sum(spec, k);
    const double g = x_op ? *x_op : std::sqrt(spec.largest() * nn);
    const double integral = trace.sqrt_loss_integral.back() + trace.sqrt_loss_tail;
    const double inner = theta_perp0_norm + static_cast<double>(depth) * lambda * lambda * g * integral;
    return c * s_k / nn * inner * inner;
}

}  // namespace benign
