#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilvm/tensor.hpp"

namespace ilvm {

// Shortest text form of a double that round-trips to the same bits.
std::string format_double(double v);

// Comma-separated matrix. A leading non-numeric line is treated as a header
// and skipped. Rows must have equal length.
TensorValue read_matrix_csv(const std::string& path);

// Writes header (if nonempty) then one row per matrix row. If labels is
// given, it must have one entry per row and is appended as a final column.
void write_matrix_csv(const std::string& path, const std::string& header,
                      const TensorValue& matrix, const std::vector<int>* labels = nullptr);

}  // namespace ilvm
