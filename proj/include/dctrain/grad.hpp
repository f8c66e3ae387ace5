#pragma once

#include <string>
#include <vector>

#include "dctrain/graph.hpp"

namespace dctrain {

// Reverse-mode differentiation by source transformation: returns a copy of
// the graph extended with nodes computing d<output>/d<var> for each
// requested variable, marked as outputs under those names. The result is a
// plain Graph built from the same closed op set, so grad can be applied to
// its own output for higher orders.
Graph grad(const Graph& graph, const std::string& output, const std::vector<std::string>& wrt);

}  // namespace dctrain
