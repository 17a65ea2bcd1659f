#pragma once

#include <string>
#include <vector>

#include "armgraph/error.hpp"
#include "armgraph/labeled_graph.hpp"

namespace armgraph::format {

enum class FormatErrc {
  kInvalidGraph,
  kParseError,
  kConsistencyError,
  kIndexOutOfRange,
};

using FormatError = Error<FormatErrc>;

struct GraphDataset {
  std::vector<LabeledGraph> graphs;
  // Distinct labels in order of first appearance.
  std::vector<int> label_universe;
};

// Graph-classification text format:
//
//   N
//   n label            (per graph)
//   t m j1 ... jm      (per node: tag, neighbor count, 0-based neighbors)
//
// Neighbors are written in ascending order; an undirected edge appears in both
// endpoints' lines and a self loop lists the node once. Labels must be 0 or 1.
std::string write_dataset(const std::vector<LabeledGraph>& graphs);

// Inverse of write_dataset. Every neighbor listing must be mirrored by the
// other endpoint, and no neighbor may be listed twice. Graphs come back with
// canonical undirected edge lists. Errors carry the 1-based line number.
GraphDataset read_dataset(const std::string& text);

}  // namespace armgraph::format
