#include <doctest.h>

#include "armgraph/cfg_recovery.hpp"
#include "synthetic.hpp"

using namespace armgraph;
using namespace armgraph::cfg;

namespace {

BasicBlock block(Address start, std::size_t count, bool syscall = false) {
  BasicBlock b;
  b.start = start;
  b.instruction_count = count;
  b.byte_string.assign(4 * count, 0);
  b.is_syscall = syscall;
  return b;
}

}  // namespace

TEST_CASE("empty graph") {
  const auto s = compute_stats({});
  CHECK(s.node_count == 0);
  CHECK(s.edge_count == 0);
  CHECK(s.weak_component_count == 0);
  CHECK(s.syscall_node_count == 0);
  CHECK(s.covered_addresses.empty());
}

TEST_CASE("two isolated nodes") {
  ControlFlowGraph g;
  g.nodes.emplace(0x1000, block(0x1000, 1));
  g.nodes.emplace(0x2000, block(0x2000, 2, true));
  const auto s = compute_stats(g);
  CHECK(s.weak_component_count == 2);
  CHECK(s.syscall_node_count == 1);
  CHECK(s.covered_addresses == std::set<Address>{0x1000, 0x2000, 0x2004});
}

TEST_CASE("direction is ignored and kinds are counted") {
  ControlFlowGraph g;
  for (Address a : {0x10, 0x20, 0x30}) g.nodes.emplace(a, block(a, 1));
  g.edges.insert({0x10, 0x20, JumpKind::kCall});
  g.edges.insert({0x30, 0x20, JumpKind::kJump});
  g.edges.insert({0x30, 0x30, JumpKind::kJump});
  const auto s = compute_stats(g);
  CHECK(s.weak_component_count == 1);
  CHECK(s.edge_count == 3);
  CHECK(s.edges_by_kind.at(JumpKind::kJump) == 2);
  CHECK(s.edges_by_kind.at(JumpKind::kCall) == 1);
}

TEST_CASE("coverage_compare") {
  const std::set<Address> universe{0x1000, 0x1004, 0x1008, 0x100C};
  GraphStats a, b;
  a.covered_addresses = {0x1000, 0x1004};
  b.covered_addresses = {0x1004, 0x1008};
  CHECK(coverage_compare(a, b, universe) == CoverageQuadrants{1, 1, 1, 1});

  a.covered_addresses = b.covered_addresses = universe;
  CHECK(coverage_compare(a, b, universe) == CoverageQuadrants{0, 0, 4, 0});

  a.covered_addresses.insert(0x2000);
  CHECK_THROWS_AS(coverage_compare(a, b, universe), CfgError);
}

TEST_CASE("instruction universe") {
  const auto img = elf::parse_executable(testing::build_elf(testing::three_function_program()));
  const auto u = instruction_universe(img);
  CHECK(u.size() == 6);
  CHECK(*u.begin() == 0x1000);
  CHECK(*u.rbegin() == 0x1014);
}
