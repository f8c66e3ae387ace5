#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dctrain/tensor.hpp"

namespace dctrain {

using NodeId = int;

enum class Op {
  Var,
  Const,
  Add,
  Sub,
  Neg,
  MulElem,
  MatMul,
  SumAll,
  SumAxis,
  Broadcast,
  PowConst,
  Square,
  Tanh,
  Relu,
  IRelu,
  Softplus,
  ShiftedSoftplus,
  Silu,
  Heaviside,
  Reciprocal,
  Sqrt,
};

const char* op_name(Op op);
std::optional<Op> op_from_name(const std::string& name);

struct Node {
  Op op;
  std::vector<NodeId> inputs;
  Shape shape;
  // Op attributes; which ones are meaningful depends on op.
  double exponent = 0.0;           // PowConst
  int axis = 0;                    // SumAxis (only axis 0 is supported)
  bool trans_a = false, trans_b = false;  // MatMul
  Tensor value;                    // Const
};

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : GraphError {
  using GraphError::GraphError;
};

// Differentiable computation DAG. Nodes are appended in topological order
// and the graph is immutable once handed to an Evaluator. The op set is
// closed under differentiation: grad() emits only ops from the enum above.
class Graph {
 public:
  NodeId var(const std::string& name, Shape shape);
  NodeId constant(Tensor value);
  NodeId scalar(double v) { return constant(Tensor::scalar(v)); }

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId sum_all(NodeId a);
  NodeId sum_axis0(NodeId a);
  NodeId broadcast(NodeId a, Shape target);
  NodeId pow_const(NodeId a, double exponent);
  NodeId square(NodeId a);
  NodeId unary(Op op, NodeId a);

  NodeId tanh(NodeId a) { return unary(Op::Tanh, a); }
  NodeId relu(NodeId a) { return unary(Op::Relu, a); }
  NodeId irelu(NodeId a) { return unary(Op::IRelu, a); }
  NodeId heaviside(NodeId a) { return unary(Op::Heaviside, a); }
  NodeId reciprocal(NodeId a) { return unary(Op::Reciprocal, a); }
  NodeId sqrt(NodeId a) { return unary(Op::Sqrt, a); }

  // Convenience: a * scalar constant.
  NodeId scale(NodeId a, double s) { return mul(a, scalar(s)); }

  void mark_output(const std::string& name, NodeId id);

  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  const std::map<std::string, NodeId>& variables() const { return vars_; }
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }
  NodeId output(const std::string& name) const;
  NodeId variable(const std::string& name) const;
  const std::string& var_name(NodeId id) const;

 private:
  NodeId push(Node n);
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> vars_;
  std::map<NodeId, std::string> var_names_;
  std::map<std::string, NodeId> outputs_;
};

// Shape of the result of a broadcasting elementwise op, or throws.
// Allowed: equal shapes, scalar with anything, and a trailing-suffix
// broadcast (e.g. (n,m) with (m)).
Shape broadcast_shape(const Shape& a, const Shape& b);
bool is_trailing_suffix(const Shape& small, const Shape& big);

}  // namespace dctrain
