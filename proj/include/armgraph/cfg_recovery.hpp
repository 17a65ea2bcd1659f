#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "armgraph/arm_decoder.hpp"
#include "armgraph/elf_loader.hpp"
#include "armgraph/error.hpp"

namespace armgraph::cfg {

enum class CfgErrc {
  kNoExecutableSection,
  kCoverageOutsideUniverse,
};

using CfgError = Error<CfgErrc>;

struct BasicBlock {
  Address start = 0;
  std::vector<std::uint8_t> byte_string;
  std::size_t instruction_count = 0;
  bool is_syscall = false;
  InstructionKind terminator = InstructionKind::kFallthrough;

  Address end() const { return start + 4 * instruction_count; }
  bool operator==(const BasicBlock&) const = default;
};

enum class JumpKind { kFallthrough, kJump, kCondJump, kCall, kCallReturn };

std::string_view to_string(JumpKind k);
std::optional<JumpKind> jump_kind_from_string(std::string_view s);

struct Edge {
  Address src = 0;
  Address dst = 0;
  JumpKind kind = JumpKind::kFallthrough;

  auto operator<=>(const Edge&) const = default;
};

// Directed graph of basic blocks keyed by start address. Self loops are
// allowed; an edge is unique by (src, dst, kind).
struct ControlFlowGraph {
  std::map<Address, BasicBlock> nodes;
  std::set<Edge> edges;

  const BasicBlock* block_at(Address start) const;
  bool operator==(const ControlFlowGraph&) const = default;
};

enum class FunctionSource { kSymbol, kEntryPoint, kCallTarget, kPrologueHeuristic };

// Where a function's code lives. Library and import-stub functions are kept
// in the graphs so callers can decide whether to include them.
enum class FunctionOrigin { kImage, kLibrary, kImportStub };

std::string_view to_string(FunctionSource s);
std::string_view to_string(FunctionOrigin o);

struct FunctionInfo {
  Address entry = 0;
  std::optional<std::string> name;
  FunctionSource source = FunctionSource::kSymbol;
  FunctionOrigin origin = FunctionOrigin::kImage;

  bool operator==(const FunctionInfo&) const = default;
};

struct CallGraph {
  std::set<Address> nodes;
  std::set<std::pair<Address, Address>> edges;

  bool operator==(const CallGraph&) const = default;
};

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t weak_component_count = 0;
  std::size_t syscall_node_count = 0;
  std::map<JumpKind, std::size_t> edges_by_kind;
  std::set<Address> covered_addresses;

  bool operator==(const GraphStats&) const = default;
};

struct CoverageQuadrants {
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::size_t both = 0;
  std::size_t neither = 0;

  bool operator==(const CoverageQuadrants&) const = default;
};

struct RecoveryOptions {
  bool use_symbols = true;
  bool use_prologue_heuristic = true;
};

struct RecoveryResult {
  ControlFlowGraph cfg;
  CallGraph call_graph;
  std::vector<FunctionInfo> functions;  // ascending entry
  std::map<Address, FunctionOrigin> block_origin;
  std::vector<std::string> diagnostics;

  const FunctionInfo* function_at(Address entry) const;
};

// Function starts in the image: function symbols, the given direct call
// targets, link-register pushes, and the entry point. Duplicates keep the
// highest-priority source (symbol > entry point > call target > prologue).
// recover_cfg drops entries that turn out not to be decodable.
std::vector<FunctionInfo> identify_functions(
    const elf::BinaryImage& image, const std::set<Address>& call_targets,
    const RecoveryOptions& options = {});

// Recursive-traversal recovery over A32 code. Libraries are mapped above the
// image at 64 KiB aligned bases; calls reach them through imports whose
// symbol carries a canonical PLT address. Imports that no library defines
// become zero-length stub blocks above 2^32.
RecoveryResult recover_cfg(const elf::BinaryImage& image,
                           const std::vector<elf::BinaryImage>& libraries,
                           const RecoveryOptions& options = {});

GraphStats compute_stats(const ControlFlowGraph& cfg);

// Every 4-aligned address inside the image's executable sections.
std::set<Address> instruction_universe(const elf::BinaryImage& image);

CoverageQuadrants coverage_compare(const GraphStats& a, const GraphStats& b,
                                   const std::set<Address>& universe);

// Line-oriented dumps: one `src dst kind` line per edge, addresses in hex.
std::string write_edge_list(const ControlFlowGraph& cfg);
std::string write_edge_list(const CallGraph& cg);

}  // namespace armgraph::cfg
