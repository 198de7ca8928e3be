#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "benign/bench/sweep.hpp"

namespace benign::bench {

inline constexpr int kResultsSchemaVersion = 1;

/// Column order of results.csv (recorded in summary.json).
const std::vector<std::string>& results_columns();

/// results.csv (detail rows, then one aggregate row per grid point),
/// summary.json and one SVG chart per metric. Throws DomainError on empty
/// results (nothing written) and IoError on unwritable paths.
void emit_report(const SweepResults& results, const std::filesystem::path& output_dir);

/// Text of results.csv, exposed for determinism checks.
std::string results_csv(const SweepResults& results);

/// Minimal SVG line chart: mean line, CI band, log-x when the grid spans more
/// than one decade.
std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<double>& x, const std::vector<Stat>& y, bool log_y);

}  // namespace benign::bench
