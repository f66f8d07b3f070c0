#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ilvm/errors.hpp"

namespace ilvm {

// Dense fp64 value. Rank 0 (scalar), 1 (vector) or 2 (matrix), row-major.
using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

struct TensorValue {
  Shape shape;
  std::vector<double> data;

  TensorValue() = default;
  TensorValue(Shape s, std::vector<double> d);

  static TensorValue zeros(Shape s);
  static TensorValue full(Shape s, double v);
  static TensorValue scalar(double v);
  // [n] vector
  static TensorValue vector(std::vector<double> d);
  // [rows, cols] matrix from row-major data
  static TensorValue matrix(std::int64_t rows, std::int64_t cols, std::vector<double> d);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return shape.empty(); }
  std::int64_t rows() const;
  std::int64_t cols() const;
  double& at(std::int64_t i, std::int64_t j);
  double at(std::int64_t i, std::int64_t j) const;
  double scalar_value() const;
  bool all_finite() const;
};

// Concatenate rows of two matrices with equal column counts.
TensorValue vcat(const TensorValue& a, const TensorValue& b);

enum class Op : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  sub,
  mul,
  neg,
  exp,
  log,
  tanh,
  sigmoid,
  softplus,
  log_sigmoid,
  log1m_sigmoid,
  relu,
  square,
  abs,
  sum,
  mean,
  row_sum,
  broadcast_rows,
  concat_cols,
  slice_cols,
  slice_rows,
  reshape,
  add_scalar,
  mul_scalar,
  clamp,
};

const char* op_name(Op op);

class Graph;

// Handle to a node on a graph. Cheap to copy; values are owned by the graph
// and immutable once recorded.
struct Tensor {
  Graph* graph = nullptr;
  std::int64_t id = -1;

  const TensorValue& val() const;
  const Shape& shape() const;
  std::int64_t numel() const { return val().numel(); }
};

// Gradient of the root with respect to each leaf, keyed by leaf node id.
using GradientMap = std::unordered_map<std::int64_t, TensorValue>;

// Append-only tape of recorded primitive ops. Recording order is a valid
// evaluation order; backward sweeps the tape once in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Tracked leaf: receives a gradient in backward.
  Tensor leaf(TensorValue v);
  // Untracked input: data, noise, frozen parameters.
  Tensor constant(TensorValue v);

  GradientMap backward(Tensor root);

  const TensorValue& value_of(std::int64_t id) const { return nodes_[id].value; }
  bool tracked(std::int64_t id) const { return nodes_[id].tracked; }
  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
  const std::vector<std::int64_t>& leaf_ids() const { return leaves_; }

 private:
  struct Node {
    Op op = Op::constant;
    std::int64_t a = -1;
    std::int64_t b = -1;
    TensorValue value;
    double s0 = 0.0;  // scalar attribute (add_scalar/mul_scalar c, clamp lo)
    double s1 = 0.0;  // clamp hi
    std::int64_t i0 = 0;  // slice begin / broadcast rows
    std::int64_t i1 = 0;  // slice end
    bool tracked = false;
  };

  std::int64_t add_node(Node n);

  std::vector<Node> nodes_;
  std::vector<std::int64_t> leaves_;

  friend Tensor record_unary(Op, Tensor, TensorValue);
  friend Tensor record_binary(Op, Tensor, Tensor, TensorValue);
  friend Tensor record_with_attrs(Op, Tensor, Tensor, TensorValue, double, double,
                                  std::int64_t, std::int64_t);
};

// ---- primitive ops -------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor neg(Tensor a);
Tensor exp(Tensor a);
Tensor log(Tensor a);
Tensor tanh(Tensor a);
Tensor sigmoid(Tensor a);
Tensor softplus(Tensor a);
// log σ(x) = -softplus(-x); stable.
Tensor log_sigmoid(Tensor a);
// log(1 - σ(x)) = -softplus(x); stable.
Tensor log1m_sigmoid(Tensor a);
Tensor relu(Tensor a);
Tensor square(Tensor a);
Tensor abs(Tensor a);
Tensor sum(Tensor a);
Tensor mean(Tensor a);
// [B, d] -> [B]
Tensor row_sum(Tensor a);
// [d] -> [rows, d], or scalar -> [rows]
Tensor broadcast_rows(Tensor a, std::int64_t rows);
Tensor concat_cols(Tensor a, Tensor b);
Tensor slice_cols(Tensor a, std::int64_t begin, std::int64_t end);
Tensor slice_rows(Tensor a, std::int64_t begin, std::int64_t end);
Tensor reshape(Tensor a, Shape s);
Tensor add_scalar(Tensor a, double c);
Tensor mul_scalar(Tensor a, double c);
// Values clipped to [lo, hi]; gradient passes through unchanged inside the
// clamp range (inclusive) and is zero outside.
Tensor clamp(Tensor a, double lo, double hi);

// ---- gradient checking ---------------------------------------------------

// A deterministic scalar function of a fixed list of parameter tensors,
// expressed as a graph build.
using ScalarFn = std::function<Tensor(Graph&, const std::vector<Tensor>&)>;

// Max over all coordinates of |autodiff - central difference| / max(1, |cd|).
double grad_check(const ScalarFn& f, const std::vector<TensorValue>& params, double eps);

}  // namespace ilvm
