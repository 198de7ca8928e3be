#pragma once

#include <filesystem>

#include "benign/common.hpp"

namespace benign {

/// Dense matrix to CSV, one row per line, round-trip precision (%.17g).
void write_matrix_csv(const std::filesystem::path& path, const Mat& m);
Mat read_matrix_csv(const std::filesystem::path& path);

/// Creates `dir` (and parents) or throws IoError.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace benign
