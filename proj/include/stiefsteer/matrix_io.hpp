#pragma once

// Repo-wide matrix text format:
//   line 1: "d N"
//   then d lines of N decimal literals separated by single spaces.
// Output uses 17 significant digits so that doubles round-trip exactly.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "stiefsteer/linalg.hpp"

namespace stiefsteer {

// Throws ParseError on malformed input or non-finite entries.
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::filesystem::path& path);

void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix_file(const std::filesystem::path& path, const Matrix& m);

// "%.17g" rendering shared by every text format that promises round-trips.
std::string format_double17(double v);

}  // namespace stiefsteer
