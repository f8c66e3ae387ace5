#include "dctrain/eval.hpp"

#include <cmath>

#include "dctrain/grad.hpp"
#include "dctrain/kernels.hpp"

namespace dctrain {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

constexpr double kLn2 = 0.6931471805599453094172321214582;

void eval_elementwise_binary(Op op, const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = out.size();
  if (a.shape == b.shape) {
    switch (op) {
      case Op::Add: kernels::add(a.data.data(), b.data.data(), out.data.data(), n); break;
      case Op::Sub: kernels::sub(a.data.data(), b.data.data(), out.data.data(), n); break;
      default: kernels::mul(a.data.data(), b.data.data(), out.data.data(), n); break;
    }
    return;
  }
  const bool a_big = a.size() == n;
  const Tensor& big = a_big ? a : b;
  const Tensor& small = a_big ? b : a;
  const std::size_t bn = small.size();
  switch (op) {
    case Op::Add:
      kernels::add_bcast(big.data.data(), small.data.data(), out.data.data(), n, bn);
      break;
    case Op::Sub:
      if (a_big)
        kernels::sub_bcast(big.data.data(), small.data.data(), out.data.data(), n, bn);
      else
        kernels::rsub_bcast(big.data.data(), small.data.data(), out.data.data(), n, bn);
      break;
    default:
      kernels::mul_bcast(big.data.data(), small.data.data(), out.data.data(), n, bn);
      break;
  }
}

Tensor eval_node(const Graph& g, NodeId id, const std::vector<Tensor>& values,
                 const Bindings& bindings) {
  const Node& nd = g.node(id);
  switch (nd.op) {
    case Op::Var: {
      const std::string& name = g.var_name(id);
      auto it = bindings.find(name);
      if (it == bindings.end()) throw EvalError("missing binding for variable: " + name, id);
      if (it->second.shape != nd.shape)
        throw EvalError("binding for " + name + " has shape " + shape_str(it->second.shape) +
                            ", expected " + shape_str(nd.shape),
                        id);
      return it->second;
    }
    case Op::Const:
      return nd.value;
    case Op::Add:
    case Op::Sub:
    case Op::MulElem: {
      Tensor out(nd.shape);
      eval_elementwise_binary(nd.op, values[static_cast<std::size_t>(nd.inputs[0])],
                              values[static_cast<std::size_t>(nd.inputs[1])], out);
      return out;
    }
    case Op::MatMul: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      const Tensor& b = values[static_cast<std::size_t>(nd.inputs[1])];
      Tensor out(nd.shape);
      std::size_t n = nd.shape[0], m = nd.shape[1];
      std::size_t k = nd.trans_a ? a.shape[0] : a.shape[1];
      kernels::matmul(a.data.data(), b.data.data(), out.data.data(), n, k, m, nd.trans_a,
                      nd.trans_b);
      return out;
    }
    case Op::SumAll: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      return Tensor::scalar(kernels::sum(a.data.data(), a.size()));
    }
    case Op::SumAxis: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      Tensor out(nd.shape);
      kernels::col_sum(a.data.data(), a.shape[0], a.shape[1], out.data.data());
      return out;
    }
    case Op::Broadcast: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      Tensor out(nd.shape);
      const std::size_t bn = a.size();
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i % bn];
      return out;
    }
    case Op::Neg: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      Tensor out(nd.shape);
      kernels::neg(a.data.data(), out.data.data(), a.size());
      return out;
    }
    default: {
      const Tensor& a = values[static_cast<std::size_t>(nd.inputs[0])];
      Tensor out(nd.shape);
      const double* in = a.data.data();
      double* o = out.data.data();
      const std::size_t n = a.size();
      switch (nd.op) {
        case Op::PowConst: {
          const double p = nd.exponent;
          kernels::map(in, o, n, [p](double x) { return std::pow(x, p); });
          break;
        }
        case Op::Square:
          kernels::map(in, o, n, [](double x) { return x * x; });
          break;
        case Op::Tanh:
          kernels::map(in, o, n, [](double x) { return std::tanh(x); });
          break;
        case Op::Relu:
          kernels::map(in, o, n, [](double x) { return x > 0.0 ? x : 0.0; });
          break;
        case Op::IRelu:
          kernels::map(in, o, n, [](double x) { return x > 0.0 ? 0.5 * x * x : 0.0; });
          break;
        case Op::Softplus:
          kernels::map(in, o, n, [](double x) { return softplus(x); });
          break;
        case Op::ShiftedSoftplus:
          kernels::map(in, o, n, [](double x) { return softplus(x) - kLn2; });
          break;
        case Op::Silu:
          kernels::map(in, o, n, [](double x) { return x * sigmoid(x); });
          break;
        case Op::Heaviside:
          kernels::map(in, o, n, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
          break;
        case Op::Reciprocal:
          kernels::map(in, o, n, [](double x) { return 1.0 / x; });
          break;
        case Op::Sqrt:
          kernels::map(in, o, n, [](double x) { return std::sqrt(x); });
          break;
        default:
          throw EvalError(std::string("cannot evaluate op ") + op_name(nd.op), id);
      }
      return out;
    }
  }
}

}  // namespace

Evaluator::Evaluator(const Graph& graph, std::vector<std::string> outputs)
    : graph_(&graph), wanted_(std::move(outputs)) {
  if (wanted_.empty())
    for (const auto& [name, id] : graph.outputs()) wanted_.push_back(name);

  const std::size_t n = graph.num_nodes();
  last_use_.assign(n, -1);
  is_output_.assign(n, 0);
  for (const auto& name : wanted_) is_output_[static_cast<std::size_t>(graph.output(name))] = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (NodeId in : graph.node(static_cast<NodeId>(i)).inputs)
      last_use_[static_cast<std::size_t>(in)] = static_cast<NodeId>(i);
  values_.resize(n);
  computed_.assign(n, 0);
}

std::map<std::string, Tensor> Evaluator::run(const Bindings& bindings) {
  const Graph& g = *graph_;
  const std::size_t n = g.num_nodes();
  std::fill(computed_.begin(), computed_.end(), 0);

  // Mark reachable nodes from the wanted outputs so unrelated outputs in an
  // extended graph are not computed.
  std::vector<char> needed(n, 0);
  for (const auto& name : wanted_) needed[static_cast<std::size_t>(g.output(name))] = 1;
  for (std::size_t i = n; i-- > 0;)
    if (needed[i])
      for (NodeId in : g.node(static_cast<NodeId>(i)).inputs)
        needed[static_cast<std::size_t>(in)] = 1;

  for (std::size_t i = 0; i < n; ++i) {
    if (!needed[i]) continue;
    NodeId id = static_cast<NodeId>(i);
    values_[i] = eval_node(g, id, values_, bindings);
    computed_[i] = 1;
    for (double v : values_[i].data)
      if (!std::isfinite(v))
        throw NonFiniteError("non-finite value in node " + std::to_string(id) + " (" +
                                 op_name(g.node(id).op) + ")",
                             id);
    // Free dead inputs.
    for (NodeId in : g.node(id).inputs) {
      std::size_t ii = static_cast<std::size_t>(in);
      if (last_use_[ii] == id && !is_output_[ii]) values_[ii] = Tensor();
    }
  }

  std::map<std::string, Tensor> out;
  for (const auto& name : wanted_) {
    std::size_t oi = static_cast<std::size_t>(g.output(name));
    if (!computed_[oi]) throw GraphError("output not computed: " + name);
    out[name] = values_[oi];
    values_[oi] = Tensor();
  }
  for (auto& v : values_) v = Tensor();
  return out;
}

std::map<std::string, Tensor> eval(const Graph& graph, const Bindings& bindings) {
  return Evaluator(graph).run(bindings);
}

double check_grad(const Graph& graph, const std::string& output, const std::string& wrt,
                  const Bindings& point, double eps) {
  if (!(eps > 0.0)) throw GraphError("check_grad: eps must be positive");
  Graph g = grad(graph, output, {wrt});
  const std::string gname = "d" + output + "/d" + wrt;
  Tensor analytic = Evaluator(g, {gname}).run(point).at(gname);

  Evaluator fwd(graph, {output});
  Bindings p = point;
  Tensor& x = p.at(wrt);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + eps;
    double fp = fwd.run(p).at(output).data[0];
    x.data[i] = saved - eps;
    double fm = fwd.run(p).at(output).data[0];
    x.data[i] = saved;
    double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic.data[i];
    double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
  }
  return max_rel;
}

}  // namespace dctrain
