#include "dctrain/graph_io.hpp"

#include <json.hpp>

namespace dctrain {

using nlohmann::json;

std::string graph_to_json(const Graph& graph) {
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    const Node& n = graph.node(static_cast<NodeId>(i));
    json jn{{"id", i}, {"op", op_name(n.op)}, {"inputs", n.inputs}, {"shape", n.shape}};
    switch (n.op) {
      case Op::Const:
        jn["data"] = n.value.data;
        break;
      case Op::PowConst:
        jn["exponent"] = n.exponent;
        break;
      case Op::SumAxis:
        jn["axis"] = n.axis;
        break;
      case Op::MatMul:
        jn["trans_a"] = n.trans_a;
        jn["trans_b"] = n.trans_b;
        break;
      case Op::Var:
        jn["name"] = graph.var_name(static_cast<NodeId>(i));
        break;
      default:
        break;
    }
    nodes.push_back(std::move(jn));
  }
  json j{{"nodes", std::move(nodes)}, {"outputs", graph.outputs()}};
  return j.dump(2);
}

Graph graph_from_json(const std::string& text) {
  json j = json::parse(text);
  Graph g;
  for (const auto& jn : j.at("nodes")) {
    std::string opn = jn.at("op").get<std::string>();
    auto op = op_from_name(opn);
    if (!op) throw GraphError("unknown op in graph JSON: " + opn);
    Shape shape = jn.at("shape").get<Shape>();
    std::vector<NodeId> in = jn.at("inputs").get<std::vector<NodeId>>();
    NodeId id;
    switch (*op) {
      case Op::Var:
        id = g.var(jn.at("name").get<std::string>(), shape);
        break;
      case Op::Const:
        id = g.constant(Tensor(shape, jn.at("data").get<std::vector<double>>()));
        break;
      case Op::Add:
        id = g.add(in.at(0), in.at(1));
        break;
      case Op::Sub:
        id = g.sub(in.at(0), in.at(1));
        break;
      case Op::MulElem:
        id = g.mul(in.at(0), in.at(1));
        break;
      case Op::MatMul:
        id = g.matmul(in.at(0), in.at(1), jn.at("trans_a").get<bool>(),
                      jn.at("trans_b").get<bool>());
        break;
      case Op::SumAll:
        id = g.sum_all(in.at(0));
        break;
      case Op::SumAxis:
        id = g.sum_axis0(in.at(0));
        break;
      case Op::Broadcast:
        id = g.broadcast(in.at(0), shape);
        break;
      case Op::PowConst:
        id = g.pow_const(in.at(0), jn.at("exponent").get<double>());
        break;
      default:
        id = g.unary(*op, in.at(0));
        break;
    }
    if (id != jn.at("id").get<NodeId>())
      throw GraphError("graph JSON nodes are not in id order");
  }
  for (const auto& [name, id] : j.at("outputs").items())
    g.mark_output(name, id.get<NodeId>());
  return g;
}

}  // namespace dctrain
