#include "ilvm/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <utility>

namespace ilvm {

namespace {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMat>;
using MutMap = Eigen::Map<EigenRowMat>;

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// View of one operand of an elementwise op, broadcast into (rows, cols).
struct BcastView {
  const double* data;
  std::int64_t rstride;
  std::int64_t cstride;
  double at(std::int64_t i, std::int64_t j) const { return data[i * rstride + j * cstride]; }
};

// Effective (rows, cols) of a tensor for broadcasting purposes.
std::pair<std::int64_t, std::int64_t> rc(const TensorValue& v) {
  switch (v.rank()) {
    case 0: return {1, 1};
    case 1: return {1, v.shape[0]};
    default: return {v.shape[0], v.shape[1]};
  }
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

TensorValue::TensorValue(Shape s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  for (auto e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
  }
  if (shape.size() > 2) throw ShapeError("rank > 2 unsupported: " + shape_str(shape));
  if (shape_numel(shape) != numel()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match buffer length " +
                     std::to_string(data.size()));
  }
}

TensorValue TensorValue::zeros(Shape s) {
  auto n = shape_numel(s);
  return TensorValue(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

TensorValue TensorValue::full(Shape s, double v) {
  auto n = shape_numel(s);
  return TensorValue(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
}

TensorValue TensorValue::scalar(double v) { return TensorValue({}, {v}); }

TensorValue TensorValue::vector(std::vector<double> d) {
  Shape s{static_cast<std::int64_t>(d.size())};
  return TensorValue(std::move(s), std::move(d));
}

TensorValue TensorValue::matrix(std::int64_t rows, std::int64_t cols, std::vector<double> d) {
  return TensorValue({rows, cols}, std::move(d));
}

std::int64_t TensorValue::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_str(shape));
  return shape[0];
}

std::int64_t TensorValue::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_str(shape));
  return shape[1];
}

double& TensorValue::at(std::int64_t i, std::int64_t j) {
  return data[static_cast<std::size_t>(i * cols() + j)];
}

double TensorValue::at(std::int64_t i, std::int64_t j) const {
  return data[static_cast<std::size_t>(i * cols() + j)];
}

double TensorValue::scalar_value() const {
  if (numel() != 1) {
    throw ContractError("scalar_value() on tensor of shape " + shape_str(shape));
  }
  return data[0];
}

bool TensorValue::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TensorValue vcat(const TensorValue& a, const TensorValue& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("vcat: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  std::vector<double> d;
  d.reserve(a.data.size() + b.data.size());
  d.insert(d.end(), a.data.begin(), a.data.end());
  d.insert(d.end(), b.data.begin(), b.data.end());
  return TensorValue::matrix(a.rows() + b.rows(), a.cols(), std::move(d));
}

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::neg: return "neg";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::softplus: return "softplus";
    case Op::log_sigmoid: return "log_sigmoid";
    case Op::log1m_sigmoid: return "log1m_sigmoid";
    case Op::relu: return "relu";
    case Op::square: return "square";
    case Op::abs: return "abs";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::row_sum: return "row_sum";
    case Op::broadcast_rows: return "broadcast_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::slice_cols: return "slice_cols";
    case Op::slice_rows: return "slice_rows";
    case Op::reshape: return "reshape";
    case Op::add_scalar: return "add_scalar";
    case Op::mul_scalar: return "mul_scalar";
    case Op::clamp: return "clamp";
  }
  return "?";
}

const TensorValue& Tensor::val() const {
  if (!graph || id < 0) throw ContractError("use of empty Tensor handle");
  return graph->value_of(id);
}

const Shape& Tensor::shape() const { return val().shape; }

std::int64_t Graph::add_node(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

Tensor Graph::leaf(TensorValue v) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(v);
  n.tracked = true;
  auto id = add_node(std::move(n));
  leaves_.push_back(id);
  return Tensor{this, id};
}

Tensor Graph::constant(TensorValue v) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(v);
  n.tracked = false;
  return Tensor{this, add_node(std::move(n))};
}

namespace {

Graph* common_graph(Tensor a, Tensor b) {
  if (!a.graph || (b.graph && a.graph != b.graph)) {
    throw ContractError("operands belong to different graphs");
  }
  return a.graph;
}

void check_finite(Op op, const TensorValue& v) {
  if (!v.all_finite()) {
    throw NumericError(std::string("op '") + op_name(op) + "' produced non-finite values");
  }
}

}  // namespace

Tensor record_unary(Op op, Tensor a, TensorValue out) {
  check_finite(op, out);
  Graph::Node n;
  n.op = op;
  n.a = a.id;
  n.value = std::move(out);
  n.tracked = a.graph->tracked(a.id);
  return Tensor{a.graph, a.graph->add_node(std::move(n))};
}

Tensor record_binary(Op op, Tensor a, Tensor b, TensorValue out) {
  check_finite(op, out);
  Graph::Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.tracked = a.graph->tracked(a.id) || b.graph->tracked(b.id);
  return Tensor{a.graph, a.graph->add_node(std::move(n))};
}

Tensor record_with_attrs(Op op, Tensor a, Tensor b, TensorValue out, double s0, double s1,
                         std::int64_t i0, std::int64_t i1) {
  check_finite(op, out);
  Graph::Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.s0 = s0;
  n.s1 = s1;
  n.i0 = i0;
  n.i1 = i1;
  n.tracked = a.graph->tracked(a.id) || (b.id >= 0 && a.graph->tracked(b.id));
  return Tensor{a.graph, a.graph->add_node(std::move(n))};
}

// ---- forward implementations ----------------------------------------------

namespace {

// Allowed broadcasts: identical shapes, [B,d] with [d], anything with scalar.
Shape broadcast_result_shape(Op op, const TensorValue& a, const TensorValue& b) {
  if (a.shape == b.shape) return a.shape;
  if (a.numel() == 1 && a.rank() == 0) return b.shape;
  if (b.numel() == 1 && b.rank() == 0) return a.shape;
  if (a.rank() == 2 && b.rank() == 1 && a.shape[1] == b.shape[0]) return a.shape;
  if (b.rank() == 2 && a.rank() == 1 && b.shape[1] == a.shape[0]) return b.shape;
  throw ShapeError(std::string("op '") + op_name(op) + "': shapes " + shape_str(a.shape) +
                   " and " + shape_str(b.shape) + " do not conform");
}

BcastView view_as(const TensorValue& v, std::int64_t rows, std::int64_t cols) {
  auto [r, c] = rc(v);
  (void)rows;
  BcastView bv;
  bv.data = v.data.data();
  bv.rstride = (r == 1) ? 0 : c;
  bv.cstride = (c == 1) ? 0 : 1;
  (void)cols;
  return bv;
}

template <typename F>
TensorValue elementwise_binary(Op op, const TensorValue& a, const TensorValue& b, F f) {
  Shape out_shape = broadcast_result_shape(op, a, b);
  TensorValue out = TensorValue::zeros(out_shape);
  auto [rows, cols] = rc(out);
  BcastView va = view_as(a, rows, cols);
  BcastView vb = view_as(b, rows, cols);
  double* o = out.data.data();
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      *o++ = f(va.at(i, j), vb.at(i, j));
    }
  }
  return out;
}

template <typename F>
TensorValue elementwise_unary(const TensorValue& a, F f) {
  TensorValue out = a;
  for (auto& v : out.data) v = f(v);
  return out;
}

// Sum a full-shape gradient down to the shape of a broadcast operand.
TensorValue reduce_to_shape(const TensorValue& g, const Shape& target) {
  if (g.shape == target) return g;
  TensorValue out = TensorValue::zeros(target);
  auto [rows, cols] = rc(g);
  auto [tr, tc] = rc(out);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      const std::int64_t ti = (tr == 1) ? 0 : i;
      const std::int64_t tj = (tc == 1) ? 0 : j;
      out.data[static_cast<std::size_t>(ti * tc + tj)] +=
          g.data[static_cast<std::size_t>(i * cols + j)];
    }
  }
  return out;
}

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
  common_graph(a, b);
  const TensorValue& av = a.val();
  const TensorValue& bv = b.val();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("op 'matmul': shapes " + shape_str(av.shape) + " and " +
                     shape_str(bv.shape) + " do not conform");
  }
  TensorValue out = TensorValue::zeros({av.rows(), bv.cols()});
  ConstMap ma(av.data.data(), av.rows(), av.cols());
  ConstMap mb(bv.data.data(), bv.rows(), bv.cols());
  MutMap mo(out.data.data(), av.rows(), bv.cols());
  mo.noalias() = ma * mb;
  return record_binary(Op::matmul, a, b, std::move(out));
}

Tensor add(Tensor a, Tensor b) {
  common_graph(a, b);
  return record_binary(Op::add, a, b,
                       elementwise_binary(Op::add, a.val(), b.val(),
                                          [](double x, double y) { return x + y; }));
}

Tensor sub(Tensor a, Tensor b) {
  common_graph(a, b);
  return record_binary(Op::sub, a, b,
                       elementwise_binary(Op::sub, a.val(), b.val(),
                                          [](double x, double y) { return x - y; }));
}

Tensor mul(Tensor a, Tensor b) {
  common_graph(a, b);
  return record_binary(Op::mul, a, b,
                       elementwise_binary(Op::mul, a.val(), b.val(),
                                          [](double x, double y) { return x * y; }));
}

Tensor neg(Tensor a) {
  return record_unary(Op::neg, a, elementwise_unary(a.val(), [](double x) { return -x; }));
}

Tensor exp(Tensor a) {
  return record_unary(Op::exp, a,
                      elementwise_unary(a.val(), [](double x) { return std::exp(x); }));
}

Tensor log(Tensor a) {
  for (double v : a.val().data) {
    if (v <= 0.0) {
      throw DomainError("op 'log': input " + std::to_string(v) + " is not positive");
    }
  }
  return record_unary(Op::log, a,
                      elementwise_unary(a.val(), [](double x) { return std::log(x); }));
}

Tensor tanh(Tensor a) {
  return record_unary(Op::tanh, a,
                      elementwise_unary(a.val(), [](double x) { return std::tanh(x); }));
}

Tensor sigmoid(Tensor a) {
  return record_unary(Op::sigmoid, a, elementwise_unary(a.val(), stable_sigmoid));
}

Tensor softplus(Tensor a) {
  return record_unary(Op::softplus, a, elementwise_unary(a.val(), stable_softplus));
}

Tensor log_sigmoid(Tensor a) {
  return record_unary(Op::log_sigmoid, a,
                      elementwise_unary(a.val(), [](double x) { return -stable_softplus(-x); }));
}

Tensor log1m_sigmoid(Tensor a) {
  return record_unary(Op::log1m_sigmoid, a,
                      elementwise_unary(a.val(), [](double x) { return -stable_softplus(x); }));
}

Tensor relu(Tensor a) {
  return record_unary(Op::relu, a,
                      elementwise_unary(a.val(), [](double x) { return x > 0 ? x : 0.0; }));
}

Tensor square(Tensor a) {
  return record_unary(Op::square, a,
                      elementwise_unary(a.val(), [](double x) { return x * x; }));
}

Tensor abs(Tensor a) {
  return record_unary(Op::abs, a,
                      elementwise_unary(a.val(), [](double x) { return std::abs(x); }));
}

Tensor sum(Tensor a) {
  double s = 0.0;
  for (double v : a.val().data) s += v;
  return record_unary(Op::sum, a, TensorValue::scalar(s));
}

Tensor mean(Tensor a) {
  if (a.val().numel() == 0) throw ContractError("mean of empty tensor");
  double s = 0.0;
  for (double v : a.val().data) s += v;
  return record_unary(Op::mean, a, TensorValue::scalar(s / static_cast<double>(a.val().numel())));
}

Tensor row_sum(Tensor a) {
  const TensorValue& av = a.val();
  if (av.rank() != 2) {
    throw ShapeError("op 'row_sum': shape " + shape_str(av.shape) + " is not a matrix");
  }
  TensorValue out = TensorValue::zeros({av.rows()});
  for (std::int64_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < av.cols(); ++j) s += av.at(i, j);
    out.data[static_cast<std::size_t>(i)] = s;
  }
  return record_unary(Op::row_sum, a, std::move(out));
}

Tensor broadcast_rows(Tensor a, std::int64_t rows) {
  const TensorValue& av = a.val();
  if (rows < 1) throw ContractError("broadcast_rows: rows must be positive");
  TensorValue out;
  if (av.rank() == 1) {
    out = TensorValue::zeros({rows, av.shape[0]});
    for (std::int64_t i = 0; i < rows; ++i) {
      for (std::int64_t j = 0; j < av.shape[0]; ++j) {
        out.at(i, j) = av.data[static_cast<std::size_t>(j)];
      }
    }
  } else if (av.is_scalar()) {
    out = TensorValue::full({rows}, av.data[0]);
  } else {
    throw ShapeError("op 'broadcast_rows': shape " + shape_str(av.shape) +
                     " is not a vector or scalar");
  }
  return record_with_attrs(Op::broadcast_rows, a, Tensor{a.graph, -1}, std::move(out), 0, 0,
                           rows, 0);
}

Tensor concat_cols(Tensor a, Tensor b) {
  common_graph(a, b);
  const TensorValue& av = a.val();
  const TensorValue& bv = b.val();
  if (av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows()) {
    throw ShapeError("op 'concat_cols': shapes " + shape_str(av.shape) + " and " +
                     shape_str(bv.shape) + " do not conform");
  }
  TensorValue out = TensorValue::zeros({av.rows(), av.cols() + bv.cols()});
  for (std::int64_t i = 0; i < av.rows(); ++i) {
    for (std::int64_t j = 0; j < av.cols(); ++j) out.at(i, j) = av.at(i, j);
    for (std::int64_t j = 0; j < bv.cols(); ++j) out.at(i, av.cols() + j) = bv.at(i, j);
  }
  return record_binary(Op::concat_cols, a, b, std::move(out));
}

Tensor slice_cols(Tensor a, std::int64_t begin, std::int64_t end) {
  const TensorValue& av = a.val();
  if (av.rank() != 2 || begin < 0 || end > av.cols() || begin >= end) {
    throw ShapeError("op 'slice_cols': range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for shape " + shape_str(av.shape));
  }
  TensorValue out = TensorValue::zeros({av.rows(), end - begin});
  for (std::int64_t i = 0; i < av.rows(); ++i) {
    for (std::int64_t j = begin; j < end; ++j) out.at(i, j - begin) = av.at(i, j);
  }
  return record_with_attrs(Op::slice_cols, a, Tensor{a.graph, -1}, std::move(out), 0, 0, begin,
                           end);
}

Tensor slice_rows(Tensor a, std::int64_t begin, std::int64_t end) {
  const TensorValue& av = a.val();
  if (av.rank() != 2 || begin < 0 || end > av.rows() || begin >= end) {
    throw ShapeError("op 'slice_rows': range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for shape " + shape_str(av.shape));
  }
  TensorValue out = TensorValue::zeros({end - begin, av.cols()});
  for (std::int64_t i = begin; i < end; ++i) {
    for (std::int64_t j = 0; j < av.cols(); ++j) out.at(i - begin, j) = av.at(i, j);
  }
  return record_with_attrs(Op::slice_rows, a, Tensor{a.graph, -1}, std::move(out), 0, 0, begin,
                           end);
}

Tensor reshape(Tensor a, Shape s) {
  const TensorValue& av = a.val();
  if (shape_numel(s) != av.numel()) {
    throw ShapeError("op 'reshape': shape " + shape_str(av.shape) + " to " + shape_str(s) +
                     " changes element count");
  }
  TensorValue out(s, av.data);
  return record_unary(Op::reshape, a, std::move(out));
}

Tensor add_scalar(Tensor a, double c) {
  TensorValue out = elementwise_unary(a.val(), [c](double x) { return x + c; });
  return record_with_attrs(Op::add_scalar, a, Tensor{a.graph, -1}, std::move(out), c, 0, 0, 0);
}

Tensor mul_scalar(Tensor a, double c) {
  TensorValue out = elementwise_unary(a.val(), [c](double x) { return x * c; });
  return record_with_attrs(Op::mul_scalar, a, Tensor{a.graph, -1}, std::move(out), c, 0, 0, 0);
}

Tensor clamp(Tensor a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  TensorValue out = elementwise_unary(
      a.val(), [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); });
  return record_with_attrs(Op::clamp, a, Tensor{a.graph, -1}, std::move(out), lo, hi, 0, 0);
}

// ---- backward --------------------------------------------------------------

GradientMap Graph::backward(Tensor root) {
  if (root.graph != this) throw ContractError("backward: root from another graph");
  if (value_of(root.id).numel() != 1) {
    throw ContractError("backward: root of shape " + shape_str(value_of(root.id).shape) +
                        " is not scalar");
  }

  std::vector<TensorValue> adj(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);

  auto accumulate = [&](std::int64_t id, TensorValue g) {
    if (id < 0 || !nodes_[id].tracked) return;
    if (!has[id]) {
      adj[id] = std::move(g);
      has[id] = 1;
      return;
    }
    auto& dst = adj[id];
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
  };

  if (nodes_[root.id].tracked) {
    accumulate(root.id, TensorValue::full(value_of(root.id).shape, 1.0));
  }

  for (std::int64_t id = root.id; id >= 0; --id) {
    if (!has[id] || !nodes_[id].tracked) continue;
    const Node& n = nodes_[id];
    const TensorValue& g = adj[id];
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::matmul: {
        const TensorValue& av = nodes_[n.a].value;
        const TensorValue& bv = nodes_[n.b].value;
        ConstMap ma(av.data.data(), av.rows(), av.cols());
        ConstMap mb(bv.data.data(), bv.rows(), bv.cols());
        ConstMap mg(g.data.data(), av.rows(), bv.cols());
        if (nodes_[n.a].tracked) {
          TensorValue da = TensorValue::zeros(av.shape);
          MutMap mda(da.data.data(), av.rows(), av.cols());
          mda.noalias() = mg * mb.transpose();
          accumulate(n.a, std::move(da));
        }
        if (nodes_[n.b].tracked) {
          TensorValue db = TensorValue::zeros(bv.shape);
          MutMap mdb(db.data.data(), bv.rows(), bv.cols());
          mdb.noalias() = ma.transpose() * mg;
          accumulate(n.b, std::move(db));
        }
        break;
      }
      case Op::add: {
        accumulate(n.a, reduce_to_shape(g, nodes_[n.a].value.shape));
        accumulate(n.b, reduce_to_shape(g, nodes_[n.b].value.shape));
        break;
      }
      case Op::sub: {
        accumulate(n.a, reduce_to_shape(g, nodes_[n.a].value.shape));
        TensorValue ng = g;
        for (auto& v : ng.data) v = -v;
        accumulate(n.b, reduce_to_shape(ng, nodes_[n.b].value.shape));
        break;
      }
      case Op::mul: {
        const TensorValue& av = nodes_[n.a].value;
        const TensorValue& bv = nodes_[n.b].value;
        if (nodes_[n.a].tracked) {
          TensorValue da = elementwise_binary(Op::mul, g, bv,
                                              [](double x, double y) { return x * y; });
          accumulate(n.a, reduce_to_shape(da, av.shape));
        }
        if (nodes_[n.b].tracked) {
          TensorValue db = elementwise_binary(Op::mul, g, av,
                                              [](double x, double y) { return x * y; });
          accumulate(n.b, reduce_to_shape(db, bv.shape));
        }
        break;
      }
      case Op::neg: {
        TensorValue da = g;
        for (auto& v : da.data) v = -v;
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::exp: {
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= n.value.data[i];
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::log: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] /= av.data[i];
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::tanh: {
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          const double y = n.value.data[i];
          da.data[i] *= (1.0 - y * y);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::sigmoid: {
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          const double y = n.value.data[i];
          da.data[i] *= y * (1.0 - y);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::softplus: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          da.data[i] *= stable_sigmoid(av.data[i]);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::log_sigmoid: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          da.data[i] *= stable_sigmoid(-av.data[i]);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::log1m_sigmoid: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          da.data[i] *= -stable_sigmoid(av.data[i]);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::relu: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          if (av.data[i] <= 0) da.data[i] = 0;
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::square: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= 2.0 * av.data[i];
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::abs: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          const double x = av.data[i];
          da.data[i] *= (x > 0) - (x < 0);
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::sum: {
        accumulate(n.a, TensorValue::full(nodes_[n.a].value.shape, g.data[0]));
        break;
      }
      case Op::mean: {
        const double c = g.data[0] / static_cast<double>(nodes_[n.a].value.numel());
        accumulate(n.a, TensorValue::full(nodes_[n.a].value.shape, c));
        break;
      }
      case Op::row_sum: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = TensorValue::zeros(av.shape);
        for (std::int64_t i = 0; i < av.rows(); ++i) {
          for (std::int64_t j = 0; j < av.cols(); ++j) {
            da.at(i, j) = g.data[static_cast<std::size_t>(i)];
          }
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::broadcast_rows: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = TensorValue::zeros(av.shape);
        if (av.rank() == 1) {
          auto [rows, cols] = rc(g);
          for (std::int64_t i = 0; i < rows; ++i) {
            for (std::int64_t j = 0; j < cols; ++j) {
              da.data[static_cast<std::size_t>(j)] += g.data[static_cast<std::size_t>(i * cols + j)];
            }
          }
        } else {
          double s = 0;
          for (double v : g.data) s += v;
          da.data[0] = s;
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::concat_cols: {
        const TensorValue& av = nodes_[n.a].value;
        const TensorValue& bv = nodes_[n.b].value;
        if (nodes_[n.a].tracked) {
          TensorValue da = TensorValue::zeros(av.shape);
          for (std::int64_t i = 0; i < av.rows(); ++i) {
            for (std::int64_t j = 0; j < av.cols(); ++j) {
              da.at(i, j) = g.data[static_cast<std::size_t>(i * (av.cols() + bv.cols()) + j)];
            }
          }
          accumulate(n.a, std::move(da));
        }
        if (nodes_[n.b].tracked) {
          TensorValue db = TensorValue::zeros(bv.shape);
          for (std::int64_t i = 0; i < bv.rows(); ++i) {
            for (std::int64_t j = 0; j < bv.cols(); ++j) {
              db.at(i, j) =
                  g.data[static_cast<std::size_t>(i * (av.cols() + bv.cols()) + av.cols() + j)];
            }
          }
          accumulate(n.b, std::move(db));
        }
        break;
      }
      case Op::slice_cols: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = TensorValue::zeros(av.shape);
        const std::int64_t w = n.i1 - n.i0;
        for (std::int64_t i = 0; i < av.rows(); ++i) {
          for (std::int64_t j = 0; j < w; ++j) {
            da.at(i, n.i0 + j) = g.data[static_cast<std::size_t>(i * w + j)];
          }
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::slice_rows: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = TensorValue::zeros(av.shape);
        for (std::int64_t i = n.i0; i < n.i1; ++i) {
          for (std::int64_t j = 0; j < av.cols(); ++j) {
            da.at(i, j) = g.data[static_cast<std::size_t>((i - n.i0) * av.cols() + j)];
          }
        }
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::reshape: {
        TensorValue da(nodes_[n.a].value.shape, g.data);
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::add_scalar: {
        accumulate(n.a, g);
        break;
      }
      case Op::mul_scalar: {
        TensorValue da = g;
        for (auto& v : da.data) v *= n.s0;
        accumulate(n.a, std::move(da));
        break;
      }
      case Op::clamp: {
        const TensorValue& av = nodes_[n.a].value;
        TensorValue da = g;
        for (std::size_t i = 0; i < da.data.size(); ++i) {
          const double x = av.data[i];
          if (x < n.s0 || x > n.s1) da.data[i] = 0;
        }
        accumulate(n.a, std::move(da));
        break;
      }
    }
  }

  GradientMap out;
  out.reserve(leaves_.size());
  for (auto id : leaves_) {
    if (has[id]) {
      out.emplace(id, std::move(adj[id]));
    } else {
      out.emplace(id, TensorValue::zeros(nodes_[id].value.shape));
    }
  }
  return out;
}

// ---- grad_check -------------------------------------------------------------

double grad_check(const ScalarFn& f, const std::vector<TensorValue>& params, double eps) {
  if (eps <= 0) throw ContractError("grad_check: eps must be positive");

  auto eval = [&](const std::vector<TensorValue>& p, bool track) {
    Graph g;
    std::vector<Tensor> handles;
    handles.reserve(p.size());
    for (const auto& v : p) handles.push_back(track ? g.leaf(v) : g.constant(v));
    Tensor root = f(g, handles);
    struct Out {
      double value;
      GradientMap grads;
      std::vector<std::int64_t> ids;
    } out{root.val().scalar_value(), {}, {}};
    if (track) {
      out.grads = g.backward(root);
      for (const auto& h : handles) out.ids.push_back(h.id);
    }
    return out;
  };

  auto base = eval(params, true);

  double max_err = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& ad = base.grads.at(base.ids[i]);
    for (std::size_t j = 0; j < params[i].data.size(); ++j) {
      std::vector<TensorValue> p = params;
      p[i].data[j] += eps;
      double vp;
      double vm;
      try {
        vp = eval(p, false).value;
        p[i].data[j] -= 2 * eps;
        vm = eval(p, false).value;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (while perturbing parameter " +
                           std::to_string(i) + " coordinate " + std::to_string(j) + ")");
      }
      const double fd = (vp - vm) / (2 * eps);
      const double err = std::abs(ad.data[j] - fd) / std::max(1.0, std::abs(fd));
      if (err > max_err) max_err = err;
    }
  }
  return max_err;
}

}  // namespace ilvm
