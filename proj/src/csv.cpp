#include "benign/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace benign {

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_matrix_csv(const std::filesystem::path& path, const Mat& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Mat read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw IoError("malformed number '" + cell + "' in " + path.string());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("ragged CSV rows in " + path.string());
        rows.push_back(std::move(row));
    }
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

}  // namespace benign
