#include "dctrain/graph.hpp"

#include <array>

namespace dctrain {

namespace {

constexpr std::array<const char*, 21> kOpNames = {
    "Var",      "Const",    "Add",     "Sub",      "Neg",      "MulElem",        "MatMul",
    "SumAll",   "SumAxis",  "Broadcast", "PowConst", "Square",  "Tanh",           "Relu",
    "IRelu",    "Softplus", "ShiftedSoftplus", "Silu", "Heaviside", "Reciprocal", "Sqrt"};

}  // namespace

const char* op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (name == kOpNames[i]) return static_cast<Op>(i);
  return std::nullopt;
}

bool is_trailing_suffix(const Shape& small, const Shape& big) {
  if (small.size() >= big.size()) return false;
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  return true;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (is_trailing_suffix(a, b)) return b;
  if (is_trailing_suffix(b, a)) return a;
  throw ShapeError("incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) check_id(in);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw GraphError("node id " + std::to_string(id) + " out of range");
}

NodeId Graph::var(const std::string& name, Shape shape) {
  if (vars_.count(name)) throw GraphError("duplicate variable name: " + name);
  NodeId id = push({Op::Var, {}, std::move(shape)});
  vars_[name] = id;
  var_names_[id] = name;
  return id;
}

NodeId Graph::constant(Tensor value) {
  Node n{Op::Const, {}, value.shape};
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  return push({Op::Add, {a, b}, broadcast_shape(node(a).shape, node(b).shape)});
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  return push({Op::Sub, {a, b}, broadcast_shape(node(a).shape, node(b).shape)});
}

NodeId Graph::neg(NodeId a) {
  check_id(a);
  return push({Op::Neg, {a}, node(a).shape});
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  return push({Op::MulElem, {a, b}, broadcast_shape(node(a).shape, node(b).shape)});
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  check_id(a);
  check_id(b);
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2 || sb.size() != 2)
    throw ShapeError("MatMul requires rank-2 inputs, got " + shape_str(sa) + " and " +
                     shape_str(sb));
  std::size_t n = trans_a ? sa[1] : sa[0];
  std::size_t k = trans_a ? sa[0] : sa[1];
  std::size_t kb = trans_b ? sb[1] : sb[0];
  std::size_t m = trans_b ? sb[0] : sb[1];
  if (k != kb)
    throw ShapeError("MatMul inner dimensions disagree: " + shape_str(sa) + " x " + shape_str(sb));
  Node node{Op::MatMul, {a, b}, {n, m}};
  node.trans_a = trans_a;
  node.trans_b = trans_b;
  return push(std::move(node));
}

NodeId Graph::sum_all(NodeId a) {
  check_id(a);
  return push({Op::SumAll, {a}, {}});
}

NodeId Graph::sum_axis0(NodeId a) {
  check_id(a);
  const Shape& s = node(a).shape;
  if (s.size() != 2) throw ShapeError("SumAxis requires a rank-2 input, got " + shape_str(s));
  Node n{Op::SumAxis, {a}, {s[1]}};
  n.axis = 0;
  return push(std::move(n));
}

NodeId Graph::broadcast(NodeId a, Shape target) {
  check_id(a);
  const Shape& s = node(a).shape;
  if (!(s == target || s.empty() || is_trailing_suffix(s, target)))
    throw ShapeError("cannot broadcast " + shape_str(s) + " to " + shape_str(target));
  return push({Op::Broadcast, {a}, std::move(target)});
}

NodeId Graph::pow_const(NodeId a, double exponent) {
  check_id(a);
  Node n{Op::PowConst, {a}, node(a).shape};
  n.exponent = exponent;
  return push(std::move(n));
}

NodeId Graph::square(NodeId a) { return unary(Op::Square, a); }

NodeId Graph::unary(Op op, NodeId a) {
  check_id(a);
  switch (op) {
    case Op::Square:
    case Op::Tanh:
    case Op::Relu:
    case Op::IRelu:
    case Op::Softplus:
    case Op::ShiftedSoftplus:
    case Op::Silu:
    case Op::Heaviside:
    case Op::Reciprocal:
    case Op::Sqrt:
    case Op::Neg:
      return push({op, {a}, node(a).shape});
    default:
      throw GraphError(std::string("not a unary elementwise op: ") + op_name(op));
  }
}

void Graph::mark_output(const std::string& name, NodeId id) {
  check_id(id);
  outputs_[name] = id;
}

NodeId Graph::output(const std::string& name) const {
  auto it = outputs_.find(name);
  if (it == outputs_.end()) throw GraphError("no output named: " + name);
  return it->second;
}

NodeId Graph::variable(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw GraphError("no variable named: " + name);
  return it->second;
}

const std::string& Graph::var_name(NodeId id) const {
  auto it = var_names_.find(id);
  if (it == var_names_.end()) throw GraphError("node " + std::to_string(id) + " is not a Var");
  return it->second;
}

}  // namespace dctrain
