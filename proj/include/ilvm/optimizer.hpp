#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilvm/models.hpp"

namespace ilvm {

enum class OptKind { sgd, adam };

OptKind opt_kind_from_string(const std::string& s);
const char* opt_kind_name(OptKind k);

struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers plus the per-set update count used for bias
// correction. SGD keeps the count only.
struct Moments {
  std::vector<TensorValue> m;
  std::vector<TensorValue> v;
  std::int64_t t = 0;
};

Moments moments_like(const ParamSet& ps);

// In-place descent step on params. Grads must align with the set's order.
void optimizer_step(OptKind kind, ParamSet& params, const std::vector<TensorValue>& grads,
                    Moments& moments, double lr, const AdamHyper& hyper);

}  // namespace ilvm
