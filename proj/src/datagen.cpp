#include "benign/datagen.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "benign/csv.hpp"
#include "benign/linalg.hpp"

namespace benign {
namespace {

void fill_normal(Mat& m, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    // Row-major draw order, so that row i of a batch does not depend on how
    // many rows were requested.
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * normal(rng);
}

}  // namespace

void RegressionTask::validate() const {
    const auto dd = static_cast<Eigen::Index>(d());
    if (theta_star.rows() != dd)
        throw ShapeError("theta_star must have d = " + std::to_string(d()) + " rows");
    if (theta_star.cols() < 1) throw ShapeError("theta_star must have at least one column");
    if (!theta_star.allFinite()) throw DomainError("theta_star has non-finite entries");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
        throw DomainError("noise_scale must be finite and non-negative");
    if (rotation) {
        if (rotation->rows() != dd || rotation->cols() != dd)
            throw ShapeError("rotation must be d x d");
        const double err =
            (rotation->transpose() * (*rotation) - Mat::Identity(dd, dd)).norm();
        if (!(err <= 1e-10)) throw DomainError("rotation is not orthogonal (error " + std::to_string(err) + ")");
    }
}

Mat RegressionTask::covariance() const {
    const Vec lambda = spectrum.as_vector();
    if (!rotation) return lambda.asDiagonal();
    return (*rotation) * lambda.asDiagonal() * rotation->transpose();
}

Mat RegressionTask::sampling_factor() const {
    const Vec root = spectrum.as_vector().cwiseSqrt();
    if (!rotation) return root.asDiagonal();
    return root.asDiagonal() * rotation->transpose();
}

Mat sample_theta_star(std::size_t d, std::size_t q, Rng& rng) {
    if (d < 1 || q < 1) throw DomainError("sample_theta_star: d and q must be positive");
    Mat theta(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(q));
    do {
        fill_normal(theta, rng);
    } while (theta.norm() == 0.0);
    return theta / theta.norm();
}

Mat random_orthogonal(std::size_t d, Rng& rng) {
    Mat g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    fill_normal(g, rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < q.cols(); ++i)
        if (r(i, i) < 0.0) q.col(i) *= -1.0;
    return q;
}

RegressionTask make_task(CovarianceSpectrum spectrum, std::size_t q, double noise_scale,
                         bool random_rotation, Rng& rng) {
    const std::size_t d = spectrum.dim();
    RegressionTask task{std::move(spectrum), std::nullopt, sample_theta_star(d, q, rng), noise_scale};
    if (random_rotation) task.rotation = random_orthogonal(d, rng);
    task.validate();
    return task;
}

Mat sample_covariates(const RegressionTask& task, std::size_t count, Rng& rng) {
    Mat u(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(task.d()));
    fill_normal(u, rng);
    if (!task.rotation) return u * task.spectrum.as_vector().cwiseSqrt().asDiagonal();
    return u * task.sampling_factor();
}

Dataset sample_dataset(const RegressionTask& task, std::size_t n, std::uint64_t seed) {
    task.validate();
    if (n < 1) throw DomainError("sample_dataset: n must be at least 1");
    if (!(task.spectrum.largest() > 0.0))
        throw DomainError("sample_dataset: spectrum is identically zero");
    Rng rng(seed);
    Dataset ds;
    ds.seed = seed;
    ds.x = sample_covariates(task, n, rng);
    ds.omega.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(task.q()));
    fill_normal(ds.omega, rng, task.noise_scale);
    ds.y = ds.x * task.theta_star + ds.omega;
    return ds;
}

AssumptionReport check_assumptions(const Dataset& ds, const CovarianceSpectrum* spectrum) {
    AssumptionReport rep;
    rep.x_fro = ds.x.norm();
    rep.y_fro = ds.y.norm();
    const Eigen::Index n = ds.x.rows();
    const Eigen::Index d = ds.x.cols();
    if (n <= d) {
        const Mat gram = ds.x * ds.x.transpose();
        Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues()(0);
        const double hi = eig.eigenvalues()(n - 1);
        rep.x_op = std::sqrt(std::max(0.0, hi));
        rep.full_row_rank = hi > 0.0 && lo > 1e-12 * hi;
        rep.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    } else {
        // rank(XX^T) <= d < n
        rep.x_op = operator_norm(ds.x);
        rep.full_row_rank = false;
        rep.condition = std::numeric_limits<double>::infinity();
    }
    if (spectrum != nullptr && spectrum->dim() == static_cast<std::size_t>(d) &&
        spectrum->largest() > 0.0) {
        const double nn = static_cast<double>(n);
        rep.op_ratio = rep.x_op / std::sqrt(spectrum->largest() * nn);
        rep.fro_ratio = rep.x_fro / std::sqrt(nn * tail_sum(*spectrum, 0));
    }
    return rep;
}

nlohmann::json task_to_json(const RegressionTask& task) {
    return {{"spectrum", spectrum_to_json(task.spectrum)},
            {"noise_scale", task.noise_scale},
            {"rotation", task.rotation.has_value()},
            {"theta_star_norm", task.theta_star.norm()}};
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const RegressionTask& task) {
    ensure_directory(dir);
    write_matrix_csv(dir / "X.csv", ds.x);
    write_matrix_csv(dir / "Y.csv", ds.y);
    write_matrix_csv(dir / "Omega.csv", ds.omega);
    write_matrix_csv(dir / "theta_star.csv", task.theta_star);
    if (task.rotation) write_matrix_csv(dir / "rotation.csv", *task.rotation);
    const nlohmann::json manifest{{"n", ds.n()},
                                  {"d", task.d()},
                                  {"q", task.q()},
                                  {"seed", ds.seed},
                                  {"task", task_to_json(task)}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("missing manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
        const auto& t = manifest.at("task");
        RegressionTask task{spectrum_from_json(t.at("spectrum")), std::nullopt,
                            read_matrix_csv(dir / "theta_star.csv"), t.at("noise_scale").get<double>()};
        if (t.value("rotation", false)) task.rotation = read_matrix_csv(dir / "rotation.csv");
        task.validate();
        Dataset ds{read_matrix_csv(dir / "X.csv"), read_matrix_csv(dir / "Y.csv"),
                   read_matrix_csv(dir / "Omega.csv"), manifest.at("seed").get<std::uint64_t>()};
        const auto n = manifest.at("n").get<Eigen::Index>();
        if (ds.x.rows() != n || ds.y.rows() != n || ds.omega.rows() != n ||
            ds.x.cols() != static_cast<Eigen::Index>(task.d()) ||
            ds.y.cols() != static_cast<Eigen::Index>(task.q()) || ds.omega.cols() != ds.y.cols())
            throw ShapeError("dataset files disagree with manifest dimensions");
        return {std::move(ds), std::move(task)};
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad dataset manifest: ") + e.what());
    }
}

}  // namespace benign
