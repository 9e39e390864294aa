#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "shiftlab/evaluate.hpp"
#include "shiftlab/matrix.hpp"

namespace shiftlab::report {

// Matrix grid CSV: optional "# " comment lines, then one line per row.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& comments = {});
Matrix read_matrix_csv(const std::filesystem::path& path);

// Per-scheme outputs, written to dir/<scheme>/:
//   report.json, table1.csv, runs.csv, disparity_avg.csv, marginal_avg.csv,
//   per_subject_disparity.csv
void write_scheme_report(const std::filesystem::path& dir, const evaluate::SchemeReport& report);

// Merges every dir/<scheme>/ present into dir/report.json, dir/table1.csv,
// dir/runs.csv and dir/per_subject_disparity.csv. Returns the schemes found.
// Throws io error when no scheme directory exists or a file is missing.
std::vector<std::string> consolidate(const std::filesystem::path& dir);

// Plain-text Table I style summary of a consolidated directory.
void print_summary(std::ostream& out, const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace shiftlab::report
