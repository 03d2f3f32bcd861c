#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtiqa {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors; no bounds checking beyond debug asserts.
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  double item() const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A named, optimizable array. `grad` always matches `value` in shape.
struct Parameter {
  Parameter(std::string name, Tensor value, bool requires_grad = true);

  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;

  void zero_grad() { grad.fill(0.0); }
};

using ParameterPtr = std::shared_ptr<Parameter>;

enum class OpKind {
  kInput,
  kConstant,
  kParameter,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddScalar,
  kMulScalar,
  kExp,
  kLog,
  kSqrt,
  kTanh,
  kRelu,
  kSum,
  kMean,
  kSoftmax,
  kL2Normalize,
  kNormalCdf,
  kConcat,
  kSlice,
  kReshape,
  kCustom,
};

const char* op_name(OpKind kind);

struct NodeId {
  std::uint32_t index = 0;
};

/// Forward rule of a user-defined op: fills `out` from the input values.
using CustomForward = std::function<void(std::span<const Tensor* const> inputs, Tensor& out)>;
/// Adjoint rule: accumulates into `input_grads[i]` given the output gradient.
using CustomBackward =
    std::function<void(std::span<const Tensor* const> inputs, const Tensor& out, const Tensor& out_grad,
                       std::span<Tensor* const> input_grads)>;

/// Static computation graph. Nodes are appended in topological order; every
/// builder call infers and validates the output shape eagerly, so shape
/// errors surface at construction with the offending node named.
///
/// `evaluate` binds inputs and runs the forward pass, caching every node
/// value; `backprop` then walks the tape in reverse and accumulates (+=)
/// gradients into each participating Parameter.
class Graph {
 public:
  NodeId input(std::string name, Shape shape);
  NodeId constant(Tensor value);
  NodeId parameter(ParameterPtr param);

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);

  // Elementwise binary ops broadcast with numpy semantics.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);

  NodeId add_scalar(NodeId a, double c);
  NodeId mul_scalar(NodeId a, double c);
  NodeId neg(NodeId a) { return mul_scalar(a, -1.0); }
  /// c - a
  NodeId rsub_scalar(double c, NodeId a) { return add_scalar(mul_scalar(a, -1.0), c); }

  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId normal_cdf(NodeId a);

  // Reductions drop the reduced axis.
  NodeId sum(NodeId a, std::size_t axis);
  NodeId mean(NodeId a, std::size_t axis);
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);

  NodeId softmax(NodeId a, std::size_t axis);
  NodeId l2_normalize(NodeId a, std::size_t axis);

  NodeId concat(std::vector<NodeId> parts, std::size_t axis);
  NodeId slice(NodeId a, std::size_t axis, std::size_t begin, std::size_t end);
  NodeId reshape(NodeId a, Shape shape);

  NodeId custom(std::string name, std::vector<NodeId> inputs, Shape out_shape, CustomForward forward,
                CustomBackward backward);

  void mark_output(const std::string& name, NodeId id);
  NodeId output(const std::string& name) const;

  /// Runs the forward pass. Inputs must be bound for every `input` node.
  std::map<std::string, Tensor> evaluate(const std::map<std::string, Tensor>& inputs = {});

  /// Reverse pass seeded with d(seed)/d(seed) = 1. The seed must be scalar.
  void backprop(const std::string& seed_output);
  void backprop(NodeId seed);

  const Tensor& value(NodeId id) const;
  const Shape& shape(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const;
  std::string describe(NodeId id) const;

  /// Distinct parameters referenced by the graph, in first-use order.
  std::vector<ParameterPtr> parameters() const;

  bool evaluated() const { return evaluated_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Shape shape;
    std::string name;  // input name, custom op name, or empty
    Tensor constant;
    ParameterPtr param;
    std::size_t axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    double scalar = 0.0;
    bool requires_grad = false;
    std::shared_ptr<CustomForward> custom_forward;
    std::shared_ptr<CustomBackward> custom_backward;
  };

  NodeId push(Node node);
  NodeId unary(OpKind kind, NodeId a);
  NodeId binary(OpKind kind, NodeId a, NodeId b);
  NodeId reduce(OpKind kind, NodeId a, std::size_t axis);
  void check(NodeId id) const;

  void forward_node(std::size_t i);
  void backward_node(std::size_t i);

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::map<std::string, NodeId> outputs_;
  bool evaluated_ = false;
};

}  // namespace mtiqa
