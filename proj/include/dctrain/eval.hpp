#pragma once

#include <map>
#include <string>
#include <vector>

#include "dctrain/graph.hpp"

namespace dctrain {

using Bindings = std::map<std::string, Tensor>;

struct EvalError : GraphError {
  EvalError(const std::string& msg, NodeId id) : GraphError(msg), node_id(id) {}
  NodeId node_id;
};
struct NonFiniteError : EvalError {
  using EvalError::EvalError;
};

// Single forward pass over a graph. Each node is computed exactly once;
// intermediate buffers are released after their last use. An Evaluator
// holds only a private workspace, so one graph may be evaluated from
// several threads through separate Evaluator instances.
class Evaluator {
 public:
  // Evaluates the named outputs (all marked outputs when empty).
  explicit Evaluator(const Graph& graph, std::vector<std::string> outputs = {});

  std::map<std::string, Tensor> run(const Bindings& bindings);

 private:
  const Graph* graph_;
  std::vector<std::string> wanted_;
  std::vector<NodeId> last_use_;   // step after which a node's value is dead
  std::vector<char> is_output_;
  std::vector<Tensor> values_;     // workspace, indexed by node id
  std::vector<char> computed_;
};

// One-shot convenience wrapper.
std::map<std::string, Tensor> eval(const Graph& graph, const Bindings& bindings);

// Compares the analytic gradient of `output` w.r.t. `wrt` against central
// finite differences at `point`, component by component. Returns the
// maximum relative error with denominator max(|analytic|, |numeric|, 1e-8).
double check_grad(const Graph& graph, const std::string& output, const std::string& wrt,
                  const Bindings& point, double eps);

}  // namespace dctrain
