#pragma once

#include <string>

#include "dctrain/graph.hpp"

namespace dctrain {

// Debug dump of a graph as JSON; to_json/from_json round-trip losslessly.
std::string graph_to_json(const Graph& graph);
Graph graph_from_json(const std::string& text);

}  // namespace dctrain
