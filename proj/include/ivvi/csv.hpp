#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ivvi/types.hpp"

namespace ivvi::csv {

/// Formats a double with 17 significant digits (round-trip exact).
std::string format(double v);

void write_row(std::ostream& out, const std::vector<std::string>& cells);
void write_row(std::ostream& out, const std::vector<double>& cells);

/// Splits one line on commas. No quoting support; the files written here
/// never need it.
std::vector<std::string> split(const std::string& line);

/// Writes a labelled matrix as `row,col_1..col_n`.
void write_matrix(std::ostream& out, const std::string& label, const Matrix& m);

}  // namespace ivvi::csv
