#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilvm/tensor.hpp"

namespace ilvm {

struct IdxData {
  TensorValue pixels;       // [n, rows*cols], values scaled to [0, 1]
  std::vector<int> labels;  // one per image; kept for plotting only
};

// Reads the big-endian IDX pair (images magic 2051, labels magic 2049).
// Bad magic or truncated payloads raise IoError; zero images raise
// ContractError.
IdxData load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace ilvm
