#include "benign/network.hpp"

#include <cmath>
#include <fstream>

#include "benign/csv.hpp"
#include "benign/kernels.hpp"
#include "benign/linalg.hpp"

namespace benign {
namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void check_depth(std::size_t depth) {
    if (depth < 2) throw DomainError("network depth L must be at least 2");
}

void check_scales(double alpha, double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
        throw DomainError("init scales alpha, beta must be finite and non-negative");
}

DeepLinearNetwork assemble(Mat w1, Mat wl, std::size_t depth, std::size_t complement) {
    DeepLinearNetwork net;
    const Eigen::Index r = w1.rows();
    net.layers.reserve(depth);
    net.layers.push_back(std::move(w1));
    for (std::size_t j = 1; j + 1 < depth; ++j) net.layers.push_back(Mat::Identity(r, r));
    net.layers.push_back(std::move(wl));
    net.hidden_complement = complement;
    return net;
}

}  // namespace

void DeepLinearNetwork::validate() const {
    if (layers.size() < 2) throw ShapeError("network needs at least two layers");
    const Eigen::Index r = layers.front().rows();
    for (std::size_t j = 1; j < layers.size(); ++j) {
        if (layers[j].cols() != layers[j - 1].rows())
            throw ShapeError("layer " + std::to_string(j + 1) + " does not compose with layer " +
                             std::to_string(j));
        if (j + 1 < layers.size() && (layers[j].rows() != r || layers[j].cols() != r))
            throw ShapeError("middle layer " + std::to_string(j + 1) + " must be square");
    }
    for (std::size_t j = 0; j < layers.size(); ++j)
        if (!layers[j].allFinite())
            throw DomainError("layer " + std::to_string(j + 1) + " has non-finite entries");
}

nlohmann::json init_spec_to_json(const InitSpec& spec) {
    if (spec.kind == InitSpec::Kind::modified_identity) return {{"kind", "modified_identity"}};
    return {{"kind", "random"}, {"alpha", spec.alpha}, {"beta", spec.beta}};
}

InitSpec init_spec_from_json(const nlohmann::json& j) {
    InitSpec spec;
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "modified_identity") {
            spec.kind = InitSpec::Kind::modified_identity;
        } else if (kind == "random") {
            spec.alpha = j.value("alpha", 1.0);
            spec.beta = j.value("beta", 1.0);
            check_scales(spec.alpha, spec.beta);
        } else {
            throw IoError("unknown init kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("init spec: ") + e.what());
    }
    return spec;
}

Mat end_to_end(const DeepLinearNetwork& net) {
    net.validate();
    Mat pt = net.layers.back().transpose();  // (W_L)^T, r x q
    for (std::size_t j = net.depth() - 1; j-- > 0;) pt = kernels::mul_tn(pt, net.layers[j]);
    return pt;
}

DeepLinearNetwork init_random(double alpha, double beta, std::size_t depth, std::size_t m,
                              std::size_t d, std::size_t q, Rng& rng) {
    check_depth(depth);
    check_scales(alpha, beta);
    if (m < 1 || d < 1 || q < 1) throw DomainError("init_random: m, d, q must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat w1(idx(m), idx(d));
    for (Eigen::Index i = 0; i < w1.rows(); ++i)
        for (Eigen::Index k = 0; k < w1.cols(); ++k) w1(i, k) = alpha * normal(rng);
    Mat wl(idx(q), idx(m));
    for (Eigen::Index i = 0; i < wl.rows(); ++i)
        for (Eigen::Index k = 0; k < wl.cols(); ++k) wl(i, k) = beta * normal(rng);
    return assemble(std::move(w1), std::move(wl), depth, 0);
}

DeepLinearNetwork init_random_reduced(double alpha, double beta, std::size_t depth,
                                      std::size_t m, std::size_t d, std::size_t q, Rng& rng) {
    check_depth(depth);
    check_scales(alpha, beta);
    if (m < 1 || d < 1 || q < 1) throw DomainError("init_random_reduced: m, d, q must be positive");
    const std::size_t c = (alpha > 0.0 ? d : 0) + (beta > 0.0 ? q : 0);
    if (m <= c) return init_random(alpha, beta, depth, m, d, q, rng);

    // Upper-triangular Bartlett factor of an m x c Gaussian matrix.
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat r = Mat::Zero(idx(c), idx(c));
    for (std::size_t i = 0; i < c; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(m - i));
        r(idx(i), idx(i)) = std::sqrt(chi2(rng));
        for (std::size_t k = i + 1; k < c; ++k) r(idx(i), idx(k)) = normal(rng);
    }
    Mat w1 = Mat::Zero(idx(c), idx(d));
    Mat wl = Mat::Zero(idx(q), idx(c));
    Eigen::Index col = 0;
    if (alpha > 0.0) {
        w1 = alpha * r.leftCols(idx(d));
        col = idx(d);
    }
    if (beta > 0.0) wl = beta * r.middleCols(col, idx(q)).transpose();
    return assemble(std::move(w1), std::move(wl), depth, m - c);
}

DeepLinearNetwork init_modified_identity(std::size_t depth, std::size_t d, std::size_t q) {
    check_depth(depth);
    if (d < 1 || q < 1) throw DomainError("init_modified_identity: d, q must be positive");
    const std::size_t m = d + q;
    Mat w1 = Mat::Zero(idx(m), idx(d));
    w1.topRows(idx(d)).setIdentity();
    Mat wl = Mat::Zero(idx(q), idx(m));
    wl.rightCols(idx(q)).setIdentity();
    return assemble(std::move(w1), std::move(wl), depth, 0);
}

DeepLinearNetwork initialize(const InitSpec& spec, std::size_t depth, std::size_t m,
                             std::size_t d, std::size_t q, Rng& rng, bool reduced) {
    if (spec.kind == InitSpec::Kind::modified_identity) return init_modified_identity(depth, d, q);
    return reduced ? init_random_reduced(spec.alpha, spec.beta, depth, m, d, q, rng)
                   : init_random(spec.alpha, spec.beta, depth, m, d, q, rng);
}

DeepLinearNetwork compress_hidden(const DeepLinearNetwork& net, double rel_tol) {
    net.validate();
    for (std::size_t j = 1; j + 1 < net.depth(); ++j)
        if (!net.layers[j].isIdentity(0.0))
            throw DomainError("compress_hidden: middle layer " + std::to_string(j + 1) +
                              " is not the identity");
    const Mat& w1 = net.layers.front();
    const Mat& wl = net.layers.back();
    const Eigen::Index d = w1.cols();
    const Eigen::Index q = wl.rows();
    Mat stacked(w1.rows(), d + q);
    stacked << w1, wl.transpose();

    Eigen::ColPivHouseholderQR<Mat> qr(stacked);
    const double scale = std::max(stacked.norm(), 1e-300);
    Eigen::Index k = 0;
    const Mat rfac = qr.matrixR().topRows(std::min(stacked.rows(), d + q)).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < rfac.rows(); ++i)
        if (std::abs(rfac(i, i)) > rel_tol * scale) k = i + 1;
    // Q^T [W_1, W_L^T] restricted to the leading k directions.
    const Mat coords = rfac.topRows(k) * qr.colsPermutation().transpose();

    DeepLinearNetwork out =
        assemble(coords.leftCols(d), coords.rightCols(q).transpose(), net.depth(),
                 net.hidden_complement + static_cast<std::size_t>(w1.rows() - k));
    return out;
}

std::vector<double> layer_op_norms(const DeepLinearNetwork& net, std::vector<Vec>* warm,
                                   const PowerIterationOptions& opts) {
    if (warm != nullptr && warm->size() != net.depth()) warm->assign(net.depth(), Vec());
    std::vector<double> norms(net.depth());
    for (std::size_t j = 0; j < net.depth(); ++j) {
        Vec* ws = warm != nullptr ? &(*warm)[j] : nullptr;
        double v = operator_norm(net.layers[j], ws, opts);
        if (j > 0 && j + 1 < net.depth() && net.hidden_complement > 0) v = std::max(v, 1.0);
        norms[j] = v;
    }
    return norms;
}

double max_subset_opnorm_product(const std::vector<double>& norms) {
    double prod = 1.0;
    for (double v : norms)
        if (v > 1.0) prod *= v;
    return prod;
}

double max_subset_opnorm_product(const DeepLinearNetwork& net) {
    return max_subset_opnorm_product(layer_op_norms(net));
}

void save_checkpoint(const std::filesystem::path& dir, const DeepLinearNetwork& net,
                     const InitSpec& spec, std::uint64_t seed) {
    net.validate();
    ensure_directory(dir);
    for (std::size_t j = 0; j < net.depth(); ++j)
        write_matrix_csv(dir / ("layer_" + std::to_string(j + 1) + ".csv"), net.layers[j]);
    const nlohmann::json manifest{{"L", net.depth()},
                                  {"m", net.width()},
                                  {"d", net.input_dim()},
                                  {"q", net.output_dim()},
                                  {"hidden_complement", net.hidden_complement},
                                  {"init_spec", init_spec_to_json(spec)},
                                  {"seed", seed}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("missing manifest.json in " + dir.string());
    Checkpoint cp;
    try {
        nlohmann::json manifest;
        in >> manifest;
        const auto depth = manifest.at("L").get<std::size_t>();
        check_depth(depth);
        for (std::size_t j = 0; j < depth; ++j)
            cp.net.layers.push_back(read_matrix_csv(dir / ("layer_" + std::to_string(j + 1) + ".csv")));
        cp.net.hidden_complement = manifest.value("hidden_complement", std::size_t{0});
        cp.spec = init_spec_from_json(manifest.at("init_spec"));
        cp.seed = manifest.at("seed").get<std::uint64_t>();
        cp.net.validate();
        if (cp.net.width() != manifest.at("m").get<std::size_t>() ||
            cp.net.input_dim() != manifest.at("d").get<std::size_t>() ||
            cp.net.output_dim() != manifest.at("q").get<std::size_t>())
            throw ShapeError("checkpoint layers disagree with manifest dimensions");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad checkpoint manifest: ") + e.what());
    }
    return cp;
}

}  // namespace benign
