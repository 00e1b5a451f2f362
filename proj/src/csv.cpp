#include "ivvi/csv.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace ivvi::csv {

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

void write_row(std::ostream& out, const std::vector<double>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << format(cells[i]);
  }
  out << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

void write_matrix(std::ostream& out, const std::string& label, const Matrix& m) {
  std::vector<std::string> header{label};
  for (Eigen::Index j = 0; j < m.cols(); ++j) header.push_back("c" + std::to_string(j + 1));
  write_row(out, header);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i + 1)};
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format(m(i, j)));
    write_row(out, row);
  }
}

}  // namespace ivvi::csv
