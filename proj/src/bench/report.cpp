#include "benign/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "benign/csv.hpp"

namespace benign::bench {
namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

nlohmann::json json_num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

nlohmann::json stat_json(const Stat& s) {
    return {{"mean", json_num(s.mean)}, {"half_width", json_num(s.half_width)},
            {"median", json_num(s.median)}, {"count", s.count}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

bool has_finite(const std::vector<Stat>& ys) {
    return std::any_of(ys.begin(), ys.end(), [](const Stat& s) { return std::isfinite(s.mean); });
}

}  // namespace

const std::vector<std::string>& results_columns() {
    static const std::vector<std::string> cols = {
        "row_type", "grid_index", "grid_value", "run", "seed", "ok", "error",
        "excess_risk", "excess_risk_mc", "mc_half_width", "dist_to_min_norm", "theta_perp_norm",
        "bias_term", "variance_term", "cross_term", "xi_term", "final_loss", "steps", "converged",
        "max_w1_drift_ratio", "growth_bound_violations", "growth_bound_min_slack",
        "failures", "risk_mean", "risk_half_width", "risk_median", "risk_count",
        "dist_mean", "dist_half_width", "dist_median", "dist_count"};
    return cols;
}

std::string results_csv(const SweepResults& results) {
    std::ostringstream os;
    const auto& cols = results_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : results.runs) {
        os << "run," << r.grid_index << ',' << num(r.grid_value) << ',' << r.run << ',' << r.seed << ','
           << (r.ok ? 1 : 0) << ',' << quoted(r.error) << ',' << num(r.excess_risk) << ','
           << num(r.excess_risk_mc) << ',' << num(r.mc_half_width) << ',' << num(r.dist_to_min_norm) << ','
           << num(r.theta_perp_norm) << ',' << num(r.bias_term) << ',' << num(r.variance_term) << ','
           << num(r.cross_term) << ',' << num(r.xi_term) << ',' << num(r.final_loss) << ',' << r.steps << ','
           << (r.converged ? 1 : 0) << ',' << num(r.max_w1_drift_ratio) << ',' << r.growth_bound_violations
           << ',' << num(r.growth_bound_min_slack) << ",,,,,,,,,\n";
    }
    for (const auto& p : results.points) {
        os << "aggregate," << p.grid_index << ',' << num(p.grid_value) << ",,,,";
        for (int i = 0; i < 15; ++i) os << ',';
        os << ',' << p.failures << ',' << num(p.excess_risk.mean) << ',' << num(p.excess_risk.half_width) << ','
           << num(p.excess_risk.median) << ',' << p.excess_risk.count << ',' << num(p.dist_to_min_norm.mean) << ','
           << num(p.dist_to_min_norm.half_width) << ',' << num(p.dist_to_min_norm.median) << ','
           << p.dist_to_min_norm.count << '\n';
    }
    return os.str();
}

std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<double>& x, const std::vector<Stat>& y, bool log_y) {
    require_shape(x.size() == y.size(), "svg_chart: x and y lengths differ");
    if (x.empty()) throw DomainError("svg_chart: no points");
    const double xmin = *std::min_element(x.begin(), x.end());
    const double xmax = *std::max_element(x.begin(), x.end());
    const bool log_x = xmin > 0 && xmax / xmin > 10.0;

    std::vector<double> lo(y.size()), hi(y.size()), mid(y.size());
    double ymin = INFINITY, ymax = -INFINITY;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mid[i] = y[i].mean;
        lo[i] = y[i].mean - y[i].half_width;
        hi[i] = y[i].mean + y[i].half_width;
        if (log_y && !(lo[i] > 0)) lo[i] = mid[i];
        for (double v : {lo[i], hi[i], mid[i]})
            if (std::isfinite(v) && (!log_y || v > 0)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
    }
    if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
    if (ymax <= ymin) ymax = ymin + (ymin == 0 ? 1 : std::abs(ymin));

    const double w = 640, h = 420, left = 80, right = 20, top = 40, bottom = 60;
    auto tx = [&](double v) {
        const double a = log_x ? std::log10(v) : v, lo_ = log_x ? std::log10(xmin) : xmin,
                     hi_ = log_x ? std::log10(xmax) : xmax;
        return left + (hi_ > lo_ ? (a - lo_) / (hi_ - lo_) : 0.5) * (w - left - right);
    };
    auto ty = [&](double v) {
        const double a = log_y ? std::log10(v) : v, lo_ = log_y ? std::log10(ymin) : ymin,
                     hi_ = log_y ? std::log10(ymax) : ymax;
        return h - bottom - (a - lo_) / (hi_ - lo_) * (h - top - bottom);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">" << x_label
       << (log_x ? " (log)" : "") << "</text>\n";
    os << "<text x=\"20\" y=\"" << h / 2 << "\" transform=\"rotate(-90 20 " << h / 2
       << ")\" text-anchor=\"middle\">" << y_label << (log_y ? " (log)" : "") << "</text>\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        os << "<text x=\"" << tx(x[i]) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
           << num(x[i]) << "</text>\n";
    for (double v : {ymin, ymax})
        os << "<text x=\"" << left - 6 << "\" y=\"" << ty(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << num(v) << "</text>\n";

    std::ostringstream band, line;
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isfinite(mid[i]) && (!log_y || mid[i] > 0)) ok.push_back(i);
    for (std::size_t k = 0; k < ok.size(); ++k) band << (k ? " " : "") << tx(x[ok[k]]) << ',' << ty(hi[ok[k]]);
    for (std::size_t k = ok.size(); k-- > 0;) band << ' ' << tx(x[ok[k]]) << ',' << ty(lo[ok[k]]);
    for (std::size_t k = 0; k < ok.size(); ++k) line << (k ? " " : "") << tx(x[ok[k]]) << ',' << ty(mid[ok[k]]);
    if (!ok.empty()) {
        os << "<polygon points=\"" << band.str() << "\" fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
        os << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
        for (std::size_t i : ok)
            os << "<circle cx=\"" << tx(x[i]) << "\" cy=\"" << ty(mid[i]) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(const SweepResults& results, const std::filesystem::path& output_dir) {
    if (results.runs.empty() || results.points.empty()) throw DomainError("emit_report: empty results");
    const std::string csv = results_csv(results);

    nlohmann::json summary;
    summary["schema_version"] = kResultsSchemaVersion;
    summary["columns"] = results_columns();
    summary["config"] = config_to_json(results.config);
    summary["failures"] = results.failures();
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : results.points)
        points.push_back({{"grid_index", p.grid_index},
                          {"grid_value", p.grid_value},
                          {"failures", p.failures},
                          {"excess_risk", stat_json(p.excess_risk)},
                          {"dist_to_min_norm", stat_json(p.dist_to_min_norm)}});
    summary["points"] = points;

    std::vector<double> x;
    std::vector<Stat> risk, dist;
    for (const auto& p : results.points) {
        x.push_back(p.grid_value);
        risk.push_back(p.excess_risk);
        dist.push_back(p.dist_to_min_norm);
    }
    const std::string name = experiment_name(results.config.experiment);
    const std::string xlabel = results.config.experiment == Experiment::dim_sweep ? "d"
                               : (results.config.experiment == Experiment::alpha_sweep ||
                                  results.config.experiment == Experiment::relu_alpha)
                                   ? "alpha"
                                   : "beta";

    ensure_directory(output_dir);
    write_text(output_dir / "results.csv", csv);
    write_text(output_dir / "summary.json", summary.dump(2) + "\n");
    write_text(output_dir / "excess_risk.svg", svg_chart(name + ": excess risk", xlabel, "excess risk", x, risk, true));
    if (has_finite(dist))
        write_text(output_dir / "dist_to_min_norm.svg",
                   svg_chart(name + ": distance to min-norm interpolant", xlabel, "||Theta - Theta_min||_F", x, dist,
                             true));
}

}  // namespace benign::bench
