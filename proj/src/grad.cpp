#include "dctrain/grad.hpp"

namespace dctrain {

namespace {

// Reduce a contribution with the broadcast result shape back to the shape
// of the operand it flows into.
NodeId reduce_to(Graph& g, NodeId id, const Shape& target) {
  const Shape& s = g.node(id).shape;
  if (s == target) return id;
  if (target.empty()) return g.sum_all(id);
  if (s.size() == 2 && target.size() == 1 && target[0] == s[1]) return g.sum_axis0(id);
  throw ShapeError("cannot reduce gradient from " + shape_str(s) + " to " + shape_str(target));
}

// sigmoid(x) = 0.5 * (tanh(x/2) + 1), which keeps Softplus/Silu derivatives
// inside the op set.
NodeId emit_sigmoid(Graph& g, NodeId x) {
  NodeId t = g.tanh(g.scale(x, 0.5));
  return g.scale(g.add(t, g.scalar(1.0)), 0.5);
}

}  // namespace

Graph grad(const Graph& graph, const std::string& output, const std::vector<std::string>& wrt) {
  Graph g = graph;
  const NodeId out_id = g.output(output);
  if (!g.node(out_id).shape.empty() && shape_size(g.node(out_id).shape) != 1)
    throw GraphError("grad: output '" + output + "' is not scalar, has shape " +
                     shape_str(g.node(out_id).shape));
  for (const auto& v : wrt) g.variable(v);  // validate early

  const std::size_t n_orig = g.num_nodes();
  std::vector<NodeId> adj(n_orig, -1);
  adj[static_cast<std::size_t>(out_id)] = g.scalar(1.0);

  auto accumulate = [&](NodeId input, NodeId contrib) {
    if (g.node(input).op == Op::Const) return;  // terminal, adjoint never read
    contrib = reduce_to(g, contrib, g.node(input).shape);
    std::size_t i = static_cast<std::size_t>(input);
    adj[i] = adj[i] < 0 ? contrib : g.add(adj[i], contrib);
  };

  for (NodeId id = out_id; id >= 0; --id) {
    const NodeId a_id = adj[static_cast<std::size_t>(id)];
    if (a_id < 0) continue;
    // Snapshot: node references into g.nodes() may dangle after pushes.
    const Op op = g.node(id).op;
    const std::vector<NodeId> in = g.node(id).inputs;
    const bool ta = g.node(id).trans_a, tb = g.node(id).trans_b;
    const double p = g.node(id).exponent;

    switch (op) {
      case Op::Var:
      case Op::Const:
      case Op::Heaviside:
        break;
      case Op::Add:
        accumulate(in[0], a_id);
        accumulate(in[1], a_id);
        break;
      case Op::Sub:
        accumulate(in[0], a_id);
        accumulate(in[1], g.neg(a_id));
        break;
      case Op::Neg:
        accumulate(in[0], g.neg(a_id));
        break;
      case Op::MulElem:
        accumulate(in[0], g.mul(a_id, in[1]));
        accumulate(in[1], g.mul(a_id, in[0]));
        break;
      case Op::MatMul:
        if (!ta && !tb) {
          accumulate(in[0], g.matmul(a_id, in[1], false, true));
          accumulate(in[1], g.matmul(in[0], a_id, true, false));
        } else if (ta && !tb) {
          accumulate(in[0], g.matmul(in[1], a_id, false, true));
          accumulate(in[1], g.matmul(in[0], a_id, false, false));
        } else if (!ta && tb) {
          accumulate(in[0], g.matmul(a_id, in[1], false, false));
          accumulate(in[1], g.matmul(a_id, in[0], true, false));
        } else {
          accumulate(in[0], g.matmul(in[1], a_id, true, true));
          accumulate(in[1], g.matmul(a_id, in[0], true, true));
        }
        break;
      case Op::SumAll:
        accumulate(in[0], g.broadcast(a_id, g.node(in[0]).shape));
        break;
      case Op::SumAxis:
        accumulate(in[0], g.broadcast(a_id, g.node(in[0]).shape));
        break;
      case Op::Broadcast: {
        NodeId r = a_id;
        const Shape& src = g.node(in[0]).shape;
        if (src.empty())
          r = g.sum_all(a_id);
        else if (src != g.node(id).shape)
          r = g.sum_axis0(a_id);
        accumulate(in[0], r);
        break;
      }
      case Op::PowConst:
        accumulate(in[0], g.mul(a_id, g.scale(g.pow_const(in[0], p - 1.0), p)));
        break;
      case Op::Square:
        accumulate(in[0], g.mul(a_id, g.scale(in[0], 2.0)));
        break;
      case Op::Tanh:
        // d tanh = 1 - tanh^2, reusing the forward node.
        accumulate(in[0], g.mul(a_id, g.sub(g.scalar(1.0), g.square(id))));
        break;
      case Op::Relu:
        accumulate(in[0], g.mul(a_id, g.heaviside(in[0])));
        break;
      case Op::IRelu:
        accumulate(in[0], g.mul(a_id, g.relu(in[0])));
        break;
      case Op::Softplus:
      case Op::ShiftedSoftplus:
        accumulate(in[0], g.mul(a_id, emit_sigmoid(g, in[0])));
        break;
      case Op::Silu: {
        // d silu = s * (1 + x * (1 - s)) with s = sigmoid(x).
        NodeId s = emit_sigmoid(g, in[0]);
        NodeId d = g.mul(s, g.add(g.scalar(1.0), g.mul(in[0], g.sub(g.scalar(1.0), s))));
        accumulate(in[0], g.mul(a_id, d));
        break;
      }
      case Op::Reciprocal:
        accumulate(in[0], g.mul(a_id, g.neg(g.square(id))));
        break;
      case Op::Sqrt:
        accumulate(in[0], g.mul(a_id, g.scale(g.reciprocal(id), 0.5)));
        break;
    }
  }

  for (const auto& v : wrt) {
    NodeId vid = g.variable(v);
    NodeId gid = adj[static_cast<std::size_t>(vid)];
    if (gid < 0) gid = g.constant(Tensor::zeros(g.node(vid).shape));
    g.mark_output("d" + output + "/d" + v, gid);
  }
  return g;
}

}  // namespace dctrain
