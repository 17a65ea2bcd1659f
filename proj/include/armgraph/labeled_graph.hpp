#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace armgraph {

using Tag = std::uint32_t;
using NodeIndex = std::uint32_t;

// File encoding of the two classes.
inline constexpr int kMalwareLabel = 0;
inline constexpr int kBenignLabel = 1;

// Tagged graph with a class label. After to_undirected() the edge list is
// canonical: pairs (u, v) with u <= v, sorted, unique. Self loops appear once.
struct LabeledGraph {
  std::vector<Tag> node_tags;
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  int label = kMalwareLabel;

  std::size_t node_count() const { return node_tags.size(); }
  bool operator==(const LabeledGraph&) const = default;
};

// Edge set of `g` as an undirected graph. Tags and label are unchanged.
LabeledGraph to_undirected(LabeledGraph g);

// Sorted neighbor lists of a canonical undirected graph. A self loop lists the
// node itself once.
std::vector<std::vector<NodeIndex>> neighbor_lists(const LabeledGraph& g);

}  // namespace armgraph
