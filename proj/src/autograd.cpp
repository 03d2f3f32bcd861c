#include "mtiqa/autograd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "mtiqa/errors.hpp"

namespace mtiqa {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

double& Tensor::at(std::size_t row, std::size_t col) {
  assert(rank() == 2 && row < shape_[0] && col < shape_[1]);
  return data_[row * shape_[1] + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  assert(rank() == 2 && row < shape_[0] && col < shape_[1]);
  return data_[row * shape_[1] + col];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Parameter::Parameter(std::string n, Tensor v, bool rg)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), requires_grad(rg) {}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kMulScalar: return "mul_scalar";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kNormalCdf: return "normal_cdf";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kCustom: return "custom";
  }
  return "?";
}

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b, bool& ok) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  ok = true;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::size_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) ok = false;
    out[k] = std::max(da, db);
  }
  return out;
}

// Strides of `in` viewed under broadcast to `out`; broadcast axes get 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    const std::size_t ok = k + (out.size() - in.size());
    strides[ok] = (in[k] == 1 && out[ok] != 1) ? 0 : stride;
    stride *= in[k];
  }
  return strides;
}

template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  const std::size_t n = numel(out);
  const std::size_t rank = out.size();
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      ia += sa[k];
      ib += sb[k];
      if (idx[k] < out[k]) break;
      ia -= sa[k] * out[k];
      ib -= sb[k] * out[k];
      idx[k] = 0;
    }
  }
}

// [outer, n, inner] view around `axis`.
struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t k = 0; k < axis; ++k) v.outer *= shape[k];
  v.n = shape[axis];
  for (std::size_t k = axis + 1; k < shape.size(); ++k) v.inner *= shape[k];
  return v;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_cdf_value(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
double normal_pdf_value(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

void matmul_into(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::check(NodeId id) const {
  if (id.index >= nodes_.size()) throw std::out_of_range("node id " + std::to_string(id.index) + " out of range");
}

std::string Graph::describe(NodeId id) const {
  check(id);
  const Node& n = nodes_[id.index];
  std::string s = "node #" + std::to_string(id.index) + " (" + op_name(n.kind);
  if (!n.name.empty()) s += " '" + n.name + "'";
  if (n.param) s += " '" + n.param->name + "'";
  return s + ")";
}

NodeId Graph::input(std::string name, Shape shape) {
  Node n{.kind = OpKind::kInput, .shape = std::move(shape), .name = std::move(name)};
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  Node n{.kind = OpKind::kConstant, .shape = value.shape()};
  n.constant = std::move(value);
  return push(std::move(n));
}

NodeId Graph::parameter(ParameterPtr param) {
  if (!param) throw std::invalid_argument("null parameter");
  Node n{.kind = OpKind::kParameter, .shape = param->value.shape()};
  n.requires_grad = param->requires_grad;
  n.param = std::move(param);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Shape& sa = nodes_[a.index].shape;
  const Shape& sb = nodes_[b.index].shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul at node #" + std::to_string(nodes_.size()) + ": expected [m,k]x[k,n], got " +
                     to_string(sa) + " x " + to_string(sb));
  }
  Node n{.kind = OpKind::kMatMul, .inputs = {a, b}, .shape = {sa[0], sb[1]}};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  check(a);
  const Shape& sa = nodes_[a.index].shape;
  if (sa.size() != 2) {
    throw ShapeError("transpose at node #" + std::to_string(nodes_.size()) + ": expected rank 2, got " +
                     to_string(sa));
  }
  Node n{.kind = OpKind::kTranspose, .inputs = {a}, .shape = {sa[1], sa[0]}};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::binary(OpKind kind, NodeId a, NodeId b) {
  check(a);
  check(b);
  bool ok = true;
  Shape out = broadcast_shape(nodes_[a.index].shape, nodes_[b.index].shape, ok);
  if (!ok) {
    throw ShapeError(std::string(op_name(kind)) + " at node #" + std::to_string(nodes_.size()) +
                     ": shapes not broadcastable: " + to_string(nodes_[a.index].shape) + " vs " +
                     to_string(nodes_[b.index].shape));
  }
  Node n{.kind = kind, .inputs = {a, b}, .shape = std::move(out)};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary(OpKind::kAdd, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary(OpKind::kSub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(OpKind::kMul, a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary(OpKind::kDiv, a, b); }

NodeId Graph::unary(OpKind kind, NodeId a) {
  check(a);
  Node n{.kind = kind, .inputs = {a}, .shape = nodes_[a.index].shape};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double c) {
  NodeId id = unary(OpKind::kAddScalar, a);
  nodes_[id.index].scalar = c;
  return id;
}

NodeId Graph::mul_scalar(NodeId a, double c) {
  NodeId id = unary(OpKind::kMulScalar, a);
  nodes_[id.index].scalar = c;
  return id;
}

NodeId Graph::exp(NodeId a) { return unary(OpKind::kExp, a); }
NodeId Graph::log(NodeId a) { return unary(OpKind::kLog, a); }
NodeId Graph::sqrt(NodeId a) { return unary(OpKind::kSqrt, a); }
NodeId Graph::tanh(NodeId a) { return unary(OpKind::kTanh, a); }
NodeId Graph::relu(NodeId a) { return unary(OpKind::kRelu, a); }
NodeId Graph::normal_cdf(NodeId a) { return unary(OpKind::kNormalCdf, a); }

NodeId Graph::reduce(OpKind kind, NodeId a, std::size_t axis) {
  check(a);
  const Shape& sa = nodes_[a.index].shape;
  if (axis >= sa.size()) {
    throw ShapeError(std::string(op_name(kind)) + " at node #" + std::to_string(nodes_.size()) + ": axis " +
                     std::to_string(axis) + " out of range for shape " + to_string(sa));
  }
  Shape out;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    if (k != axis) out.push_back(sa[k]);
  }
  Node n{.kind = kind, .inputs = {a}, .shape = std::move(out), .axis = axis};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a, std::size_t axis) { return reduce(OpKind::kSum, a, axis); }
NodeId Graph::mean(NodeId a, std::size_t axis) { return reduce(OpKind::kMean, a, axis); }

NodeId Graph::sum_all(NodeId a) {
  check(a);
  return sum(reshape(a, {numel(nodes_[a.index].shape)}), 0);
}

NodeId Graph::mean_all(NodeId a) {
  check(a);
  return mean(reshape(a, {numel(nodes_[a.index].shape)}), 0);
}

NodeId Graph::softmax(NodeId a, std::size_t axis) {
  check(a);
  if (axis >= nodes_[a.index].shape.size()) {
    throw ShapeError("softmax at node #" + std::to_string(nodes_.size()) + ": axis out of range for " +
                     to_string(nodes_[a.index].shape));
  }
  NodeId id = unary(OpKind::kSoftmax, a);
  nodes_[id.index].axis = axis;
  return id;
}

NodeId Graph::l2_normalize(NodeId a, std::size_t axis) {
  check(a);
  if (axis >= nodes_[a.index].shape.size()) {
    throw ShapeError("l2_normalize at node #" + std::to_string(nodes_.size()) + ": axis out of range for " +
                     to_string(nodes_[a.index].shape));
  }
  NodeId id = unary(OpKind::kL2Normalize, a);
  nodes_[id.index].axis = axis;
  return id;
}

NodeId Graph::concat(std::vector<NodeId> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  for (auto p : parts) check(p);
  Shape out = nodes_[parts[0].index].shape;
  if (axis >= out.size()) throw ShapeError("concat axis out of range for " + to_string(out));
  bool rg = false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Shape& s = nodes_[parts[i].index].shape;
    rg = rg || nodes_[parts[i].index].requires_grad;
    bool compatible = s.size() == out.size();
    for (std::size_t k = 0; compatible && k < s.size(); ++k) {
      if (k != axis && s[k] != out[k]) compatible = false;
    }
    if (!compatible) {
      throw ShapeError("concat at node #" + std::to_string(nodes_.size()) + ": part " + std::to_string(i) +
                       " has shape " + to_string(s) + ", expected " + to_string(out) + " off axis " +
                       std::to_string(axis));
    }
    if (i > 0) out[axis] += s[axis];
  }
  Node n{.kind = OpKind::kConcat, .inputs = std::move(parts), .shape = std::move(out), .axis = axis};
  n.requires_grad = rg;
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, std::size_t axis, std::size_t begin, std::size_t end) {
  check(a);
  const Shape& sa = nodes_[a.index].shape;
  if (axis >= sa.size() || begin >= end || end > sa[axis]) {
    throw ShapeError("slice at node #" + std::to_string(nodes_.size()) + ": range [" + std::to_string(begin) +
                     ", " + std::to_string(end) + ") on axis " + std::to_string(axis) + " invalid for " +
                     to_string(sa));
  }
  Shape out = sa;
  out[axis] = end - begin;
  Node n{.kind = OpKind::kSlice, .inputs = {a}, .shape = std::move(out), .axis = axis, .begin = begin, .end = end};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  check(a);
  if (numel(shape) != numel(nodes_[a.index].shape)) {
    throw ShapeError("reshape at node #" + std::to_string(nodes_.size()) + ": cannot view " +
                     to_string(nodes_[a.index].shape) + " as " + to_string(shape));
  }
  Node n{.kind = OpKind::kReshape, .inputs = {a}, .shape = std::move(shape)};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

NodeId Graph::custom(std::string name, std::vector<NodeId> inputs, Shape out_shape, CustomForward forward,
                     CustomBackward backward) {
  bool rg = false;
  for (auto in : inputs) {
    check(in);
    rg = rg || nodes_[in.index].requires_grad;
  }
  Node n{.kind = OpKind::kCustom, .inputs = std::move(inputs), .shape = std::move(out_shape), .name = std::move(name)};
  n.requires_grad = rg;
  n.custom_forward = std::make_shared<CustomForward>(std::move(forward));
  n.custom_backward = std::make_shared<CustomBackward>(std::move(backward));
  return push(std::move(n));
}

void Graph::mark_output(const std::string& name, NodeId id) {
  check(id);
  outputs_[name] = id;
}

NodeId Graph::output(const std::string& name) const {
  auto it = outputs_.find(name);
  if (it == outputs_.end()) throw std::out_of_range("graph has no output named '" + name + "'");
  return it->second;
}

const Tensor& Graph::value(NodeId id) const {
  check(id);
  const Node& n = nodes_[id.index];
  if (n.kind == OpKind::kConstant) return n.constant;
  if (n.kind == OpKind::kParameter) return n.param->value;
  if (!evaluated_) throw std::logic_error("graph not evaluated; value of " + describe(id) + " unavailable");
  return values_[id.index];
}

const Shape& Graph::shape(NodeId id) const {
  check(id);
  return nodes_[id.index].shape;
}

OpKind Graph::kind(NodeId id) const {
  check(id);
  return nodes_[id.index].kind;
}

std::vector<ParameterPtr> Graph::parameters() const {
  std::vector<ParameterPtr> out;
  std::set<const Parameter*> seen;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::kParameter && seen.insert(n.param.get()).second) out.push_back(n.param);
  }
  return out;
}

std::map<std::string, Tensor> Graph::evaluate(const std::map<std::string, Tensor>& inputs) {
  values_.assign(nodes_.size(), Tensor{});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.kind == OpKind::kInput) {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) throw std::invalid_argument("input '" + n.name + "' not bound");
      if (it->second.shape() != n.shape) {
        throw ShapeError("input '" + n.name + "' at node #" + std::to_string(i) + ": expected shape " +
                         to_string(n.shape) + ", got " + to_string(it->second.shape()));
      }
      values_[i] = it->second;
    } else if (n.kind == OpKind::kParameter) {
      if (n.param->value.shape() != n.shape) {
        throw ShapeError("parameter '" + n.param->name + "' at node #" + std::to_string(i) + ": expected shape " +
                         to_string(n.shape) + ", got " + to_string(n.param->value.shape()));
      }
    } else if (n.kind != OpKind::kConstant) {
      forward_node(i);
    }
  }
  evaluated_ = true;
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : outputs_) out.emplace(name, value(id));
  return out;
}

void Graph::forward_node(std::size_t i) {
  Node& n = nodes_[i];
  evaluated_ = true;  // value() of earlier nodes is valid during the sweep
  Tensor out(n.shape);
  auto in = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };
  switch (n.kind) {
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      matmul_into(a.data().data(), b.data().data(), out.data().data(), a.shape()[0], a.shape()[1], b.shape()[1]);
      break;
    }
    case OpKind::kTranspose: {
      const Tensor& a = in(0);
      const std::size_t r = a.shape()[0];
      const std::size_t c = a.shape()[1];
      for (std::size_t x = 0; x < r; ++x)
        for (std::size_t y = 0; y < c; ++y) out[y * r + x] = a[x * c + y];
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      auto sa = broadcast_strides(a.shape(), n.shape);
      auto sb = broadcast_strides(b.shape(), n.shape);
      const double* pa = a.data().data();
      const double* pb = b.data().data();
      double* po = out.data().data();
      switch (n.kind) {
        case OpKind::kAdd:
          for_each_broadcast(n.shape, sa, sb, [&](std::size_t o, std::size_t x, std::size_t y) { po[o] = pa[x] + pb[y]; });
          break;
        case OpKind::kSub:
          for_each_broadcast(n.shape, sa, sb, [&](std::size_t o, std::size_t x, std::size_t y) { po[o] = pa[x] - pb[y]; });
          break;
        case OpKind::kMul:
          for_each_broadcast(n.shape, sa, sb, [&](std::size_t o, std::size_t x, std::size_t y) { po[o] = pa[x] * pb[y]; });
          break;
        default:
          for_each_broadcast(n.shape, sa, sb, [&](std::size_t o, std::size_t x, std::size_t y) { po[o] = pa[x] / pb[y]; });
          break;
      }
      break;
    }
    case OpKind::kAddScalar: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] + n.scalar;
      break;
    }
    case OpKind::kMulScalar: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] * n.scalar;
      break;
    }
    case OpKind::kExp: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::exp(a[k]);
      break;
    }
    case OpKind::kLog: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::log(a[k]);
      break;
    }
    case OpKind::kSqrt: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::sqrt(a[k]);
      break;
    }
    case OpKind::kTanh: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::tanh(a[k]);
      break;
    }
    case OpKind::kRelu: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] > 0.0 ? a[k] : 0.0;
      break;
    }
    case OpKind::kNormalCdf: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = normal_cdf_value(a[k]);
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      const Tensor& a = in(0);
      const AxisView v = axis_view(a.shape(), n.axis);
      const double scale = n.kind == OpKind::kMean ? 1.0 / static_cast<double>(v.n) : 1.0;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t j = 0; j < v.n; ++j) {
          const double* src = a.data().data() + (o * v.n + j) * v.inner;
          double* dst = out.data().data() + o * v.inner;
          for (std::size_t q = 0; q < v.inner; ++q) dst[q] += src[q];
        }
      }
      if (scale != 1.0)
        for (auto& x : out.data()) x *= scale;
      break;
    }
    case OpKind::kSoftmax: {
      const Tensor& a = in(0);
      const AxisView v = axis_view(a.shape(), n.axis);
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t q = 0; q < v.inner; ++q) {
          const std::size_t base = o * v.n * v.inner + q;
          double mx = a[base];
          for (std::size_t j = 1; j < v.n; ++j) mx = std::max(mx, a[base + j * v.inner]);
          double z = 0.0;
          for (std::size_t j = 0; j < v.n; ++j) {
            const double e = std::exp(a[base + j * v.inner] - mx);
            out[base + j * v.inner] = e;
            z += e;
          }
          for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] /= z;
        }
      }
      break;
    }
    case OpKind::kL2Normalize: {
      const Tensor& a = in(0);
      const AxisView v = axis_view(a.shape(), n.axis);
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t q = 0; q < v.inner; ++q) {
          const std::size_t base = o * v.n * v.inner + q;
          double ss = 0.0;
          for (std::size_t j = 0; j < v.n; ++j) ss += a[base + j * v.inner] * a[base + j * v.inner];
          const double norm = std::sqrt(ss);
          if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw NumericalError("l2_normalize at node #" + std::to_string(i) + ": zero or non-finite norm in slice " +
                                 std::to_string(o * v.inner + q));
          }
          for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] = a[base + j * v.inner] / norm;
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const AxisView vo = axis_view(n.shape, n.axis);
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const Tensor& part = in(p);
        const AxisView vp = axis_view(part.shape(), n.axis);
        for (std::size_t o = 0; o < vo.outer; ++o) {
          std::copy_n(part.data().data() + o * vp.n * vp.inner, vp.n * vp.inner,
                      out.data().data() + (o * vo.n + offset) * vo.inner);
        }
        offset += vp.n;
      }
      break;
    }
    case OpKind::kSlice: {
      const Tensor& a = in(0);
      const AxisView va = axis_view(a.shape(), n.axis);
      const std::size_t len = n.end - n.begin;
      for (std::size_t o = 0; o < va.outer; ++o) {
        std::copy_n(a.data().data() + (o * va.n + n.begin) * va.inner, len * va.inner,
                    out.data().data() + o * len * va.inner);
      }
      break;
    }
    case OpKind::kReshape: {
      const Tensor& a = in(0);
      std::copy(a.data().begin(), a.data().end(), out.data().begin());
      break;
    }
    case OpKind::kCustom: {
      std::vector<const Tensor*> ins;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) ins.push_back(&in(k));
      (*n.custom_forward)(ins, out);
      if (out.shape() != n.shape) {
        throw ShapeError("custom op '" + n.name + "' at node #" + std::to_string(i) + ": expected output shape " +
                         to_string(n.shape) + ", got " + to_string(out.shape()));
      }
      break;
    }
    default:
      break;
  }
  values_[i] = std::move(out);
}

void Graph::backprop(const std::string& seed_output) { backprop(output(seed_output)); }

void Graph::backprop(NodeId seed) {
  check(seed);
  if (!evaluated_) throw std::logic_error("backprop before evaluate");
  if (numel(nodes_[seed.index].shape) != 1) {
    throw ShapeError("backprop seed " + describe(seed) + " must be scalar, has shape " +
                     to_string(nodes_[seed.index].shape));
  }
  grads_.assign(nodes_.size(), Tensor{});
  for (std::size_t i = 0; i <= seed.index; ++i) {
    if (nodes_[i].requires_grad) grads_[i] = Tensor(nodes_[i].shape);
  }
  if (!nodes_[seed.index].requires_grad) return;
  grads_[seed.index][0] = 1.0;
  for (std::size_t i = seed.index + 1; i-- > 0;) {
    if (nodes_[i].requires_grad) backward_node(i);
  }
}

void Graph::backward_node(std::size_t i) {
  Node& n = nodes_[i];
  const Tensor& g = grads_[i];
  const Tensor& y = value(NodeId{static_cast<std::uint32_t>(i)});
  auto in = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };
  auto needs = [&](std::size_t k) { return nodes_[n.inputs[k].index].requires_grad; };
  auto gin = [&](std::size_t k) -> Tensor& { return grads_[n.inputs[k].index]; };

  switch (n.kind) {
    case OpKind::kParameter: {
      auto& pg = n.param->grad;
      for (std::size_t k = 0; k < g.size(); ++k) pg[k] += g[k];
      break;
    }
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.shape()[0];
      const std::size_t kk = a.shape()[1];
      const std::size_t nn = b.shape()[1];
      if (needs(0)) {
        Tensor& ga = gin(0);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t p = 0; p < kk; ++p) {
            double acc = 0.0;
            const double* grow = g.data().data() + r * nn;
            const double* brow = b.data().data() + p * nn;
            for (std::size_t c = 0; c < nn; ++c) acc += grow[c] * brow[c];
            ga[r * kk + p] += acc;
          }
        }
      }
      if (needs(1)) {
        Tensor& gb = gin(1);
        for (std::size_t r = 0; r < m; ++r) {
          const double* grow = g.data().data() + r * nn;
          for (std::size_t p = 0; p < kk; ++p) {
            const double av = a[r * kk + p];
            if (av == 0.0) continue;
            double* gbrow = gb.data().data() + p * nn;
            for (std::size_t c = 0; c < nn; ++c) gbrow[c] += av * grow[c];
          }
        }
      }
      break;
    }
    case OpKind::kTranspose: {
      const std::size_t r = y.shape()[1];
      const std::size_t c = y.shape()[0];
      Tensor& ga = gin(0);
      for (std::size_t x = 0; x < r; ++x)
        for (std::size_t z = 0; z < c; ++z) ga[x * c + z] += g[z * r + x];
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      auto sa = broadcast_strides(a.shape(), n.shape);
      auto sb = broadcast_strides(b.shape(), n.shape);
      const bool na = needs(0);
      const bool nb = needs(1);
      double* ga = na ? gin(0).data().data() : nullptr;
      double* gb = nb ? gin(1).data().data() : nullptr;
      const double* pa = a.data().data();
      const double* pb = b.data().data();
      const double* pg = g.data().data();
      for_each_broadcast(n.shape, sa, sb, [&](std::size_t o, std::size_t x, std::size_t z) {
        const double go = pg[o];
        switch (n.kind) {
          case OpKind::kAdd:
            if (na) ga[x] += go;
            if (nb) gb[z] += go;
            break;
          case OpKind::kSub:
            if (na) ga[x] += go;
            if (nb) gb[z] -= go;
            break;
          case OpKind::kMul:
            if (na) ga[x] += go * pb[z];
            if (nb) gb[z] += go * pa[x];
            break;
          default:
            if (na) ga[x] += go / pb[z];
            if (nb) gb[z] -= go * pa[x] / (pb[z] * pb[z]);
            break;
        }
      });
      break;
    }
    case OpKind::kAddScalar: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      break;
    }
    case OpKind::kMulScalar: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += n.scalar * g[k];
      break;
    }
    case OpKind::kExp: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k];
      break;
    }
    case OpKind::kLog: {
      Tensor& ga = gin(0);
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / a[k];
      break;
    }
    case OpKind::kSqrt: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / (2.0 * y[k]);
      break;
    }
    case OpKind::kTanh: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - y[k] * y[k]);
      break;
    }
    case OpKind::kRelu: {
      Tensor& ga = gin(0);
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += a[k] > 0.0 ? g[k] : 0.0;
      break;
    }
    case OpKind::kNormalCdf: {
      Tensor& ga = gin(0);
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * normal_pdf_value(a[k]);
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      Tensor& ga = gin(0);
      const AxisView v = axis_view(in(0).shape(), n.axis);
      const double scale = n.kind == OpKind::kMean ? 1.0 / static_cast<double>(v.n) : 1.0;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t j = 0; j < v.n; ++j) {
          double* dst = ga.data().data() + (o * v.n + j) * v.inner;
          const double* src = g.data().data() + o * v.inner;
          for (std::size_t q = 0; q < v.inner; ++q) dst[q] += scale * src[q];
        }
      }
      break;
    }
    case OpKind::kSoftmax: {
      Tensor& ga = gin(0);
      const AxisView v = axis_view(y.shape(), n.axis);
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t q = 0; q < v.inner; ++q) {
          const std::size_t base = o * v.n * v.inner + q;
          double dot = 0.0;
          for (std::size_t j = 0; j < v.n; ++j) dot += g[base + j * v.inner] * y[base + j * v.inner];
          for (std::size_t j = 0; j < v.n; ++j) {
            const std::size_t k = base + j * v.inner;
            ga[k] += y[k] * (g[k] - dot);
          }
        }
      }
      break;
    }
    case OpKind::kL2Normalize: {
      Tensor& ga = gin(0);
      const Tensor& a = in(0);
      const AxisView v = axis_view(y.shape(), n.axis);
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t q = 0; q < v.inner; ++q) {
          const std::size_t base = o * v.n * v.inner + q;
          double ss = 0.0;
          double dot = 0.0;
          for (std::size_t j = 0; j < v.n; ++j) {
            const std::size_t k = base + j * v.inner;
            ss += a[k] * a[k];
            dot += g[k] * y[k];
          }
          const double norm = std::sqrt(ss);
          for (std::size_t j = 0; j < v.n; ++j) {
            const std::size_t k = base + j * v.inner;
            ga[k] += (g[k] - y[k] * dot) / norm;
          }
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const AxisView vo = axis_view(n.shape, n.axis);
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const AxisView vp = axis_view(in(p).shape(), n.axis);
        if (needs(p)) {
          Tensor& gp = gin(p);
          for (std::size_t o = 0; o < vo.outer; ++o) {
            const double* src = g.data().data() + (o * vo.n + offset) * vo.inner;
            double* dst = gp.data().data() + o * vp.n * vp.inner;
            for (std::size_t k = 0; k < vp.n * vp.inner; ++k) dst[k] += src[k];
          }
        }
        offset += vp.n;
      }
      break;
    }
    case OpKind::kSlice: {
      Tensor& ga = gin(0);
      const AxisView va = axis_view(in(0).shape(), n.axis);
      const std::size_t len = n.end - n.begin;
      for (std::size_t o = 0; o < va.outer; ++o) {
        const double* src = g.data().data() + o * len * va.inner;
        double* dst = ga.data().data() + (o * va.n + n.begin) * va.inner;
        for (std::size_t k = 0; k < len * va.inner; ++k) dst[k] += src[k];
      }
      break;
    }
    case OpKind::kReshape: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      break;
    }
    case OpKind::kCustom: {
      std::vector<const Tensor*> ins;
      std::vector<Tensor> scratch(n.inputs.size());
      std::vector<Tensor*> outs;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        ins.push_back(&in(k));
        if (needs(k)) {
          outs.push_back(&gin(k));
        } else {
          scratch[k] = Tensor(in(k).shape());
          outs.push_back(&scratch[k]);
        }
      }
      (*n.custom_backward)(ins, y, g, outs);
      break;
    }
    default:
      break;
  }
}

}  // namespace mtiqa
