#include <deque>
#include <unordered_map>

#include "armgraph/cfg_recovery.hpp"

namespace armgraph::cfg {

GraphStats compute_stats(const ControlFlowGraph& cfg) {
  GraphStats stats;
  stats.node_count = cfg.nodes.size();
  stats.edge_count = cfg.edges.size();

  std::unordered_map<Address, std::vector<Address>> undirected;
  for (const auto& e : cfg.edges) {
    ++stats.edges_by_kind[e.kind];
    undirected[e.src].push_back(e.dst);
    undirected[e.dst].push_back(e.src);
  }

  std::unordered_map<Address, bool> visited;
  for (const auto& [start, block] : cfg.nodes) {
    if (block.is_syscall) ++stats.syscall_node_count;
    for (Address a = block.start; a < block.end(); a += 4) stats.covered_addresses.insert(a);

    if (visited[start]) continue;
    ++stats.weak_component_count;
    std::deque<Address> queue{start};
    visited[start] = true;
    while (!queue.empty()) {
      const Address v = queue.front();
      queue.pop_front();
      for (Address u : undirected[v]) {
        if (!visited[u]) {
          visited[u] = true;
          queue.push_back(u);
        }
      }
    }
  }
  return stats;
}

std::set<Address> instruction_universe(const elf::BinaryImage& image) {
  std::set<Address> out;
  for (const auto& s : image.sections) {
    if (!s.executable() || !s.has_bytes()) continue;
    for (Address a = (s.vaddr + 3) / 4 * 4; a + 4 <= s.vaddr + s.size; a += 4) out.insert(a);
  }
  return out;
}

CoverageQuadrants coverage_compare(const GraphStats& a, const GraphStats& b,
                                   const std::set<Address>& universe) {
  for (const auto* covered : {&a.covered_addresses, &b.covered_addresses}) {
    for (Address x : *covered) {
      if (!universe.contains(x)) {
        throw CfgError(CfgErrc::kCoverageOutsideUniverse,
                       "covered address outside the universe: " + std::to_string(x));
      }
    }
  }
  CoverageQuadrants q;
  for (Address x : universe) {
    const bool in_a = a.covered_addresses.contains(x);
    const bool in_b = b.covered_addresses.contains(x);
    if (in_a && in_b) ++q.both;
    else if (in_a) ++q.only_a;
    else if (in_b) ++q.only_b;
    else ++q.neither;
  }
  return q;
}

}  // namespace armgraph::cfg
