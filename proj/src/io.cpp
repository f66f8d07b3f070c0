#include "ilvm/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ilvm {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    while (end && (*end == ' ' || *end == '\r')) ++end;
    if (!end || *end != '\0') return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace

TensorValue read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::vector<double> row;
  std::vector<double> data;
  std::int64_t cols = -1;
  std::int64_t rows = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (!parse_row(line, row)) {
      if (first) {
        first = false;  // header
        continue;
      }
      throw IoError("'" + path + "': malformed row '" + line + "'");
    }
    first = false;
    if (cols < 0) {
      cols = static_cast<std::int64_t>(row.size());
    } else if (cols != static_cast<std::int64_t>(row.size())) {
      throw IoError("'" + path + "': ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw IoError("'" + path + "': no data rows");
  return TensorValue::matrix(rows, cols, std::move(data));
}

void write_matrix_csv(const std::string& path, const std::string& header,
                      const TensorValue& matrix, const std::vector<int>* labels) {
  if (matrix.rank() != 2) throw ContractError("write_matrix_csv: matrix required");
  if (labels && static_cast<std::int64_t>(labels->size()) != matrix.rows()) {
    throw ContractError("write_matrix_csv: one label per row required");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (!header.empty()) out << header << "\n";
  for (std::int64_t i = 0; i < matrix.rows(); ++i) {
    for (std::int64_t j = 0; j < matrix.cols(); ++j) {
      if (j) out << ",";
      out << format_double(matrix.at(i, j));
    }
    if (labels) out << "," << (*labels)[static_cast<std::size_t>(i)];
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ilvm
