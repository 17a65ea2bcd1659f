#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "armgraph/cfg_recovery.hpp"
#include "armgraph/error.hpp"
#include "armgraph/labeled_graph.hpp"
#include "armgraph/tag_dictionary.hpp"

namespace armgraph::prep {

enum class PrepErrc {
  kMissingBlock,
  kUnknownTag,
  kEmptyClass,
  kInvalidManifest,
  kIoError,
};

using PrepError = Error<PrepErrc>;

// Call graph without library and import-stub functions: their nodes and every
// edge touching them are removed.
cfg::CallGraph drop_library_functions(const cfg::CallGraph& cg,
                                      const std::vector<cfg::FunctionInfo>& functions);

// Blocks whose tags feed the dictionary: every block, or only blocks owned by
// image code when library code is excluded.
std::vector<cfg::BasicBlock> taggable_blocks(const cfg::RecoveryResult& recovery,
                                             bool include_library_code);

// One node per call-graph function in ascending entry order, tagged by the
// bytes of the block that starts at the entry. The label is left at its
// default; callers set it.
LabeledGraph select_call_graph_nodes(const cfg::ControlFlowGraph& cfg,
                                     const cfg::CallGraph& cg,
                                     const TagDictionary& dict);

// Whole CFG as a tagged graph, nodes in ascending block address.
LabeledGraph cfg_to_labeled_graph(const cfg::ControlFlowGraph& cfg,
                                  const TagDictionary& dict);

struct ManifestRecord {
  std::string sample_id;
  std::filesystem::path path;
  int label = kMalwareLabel;
  std::string sha256;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  bool operator==(const DatasetManifest&) const = default;
};

// `<sample_id>\t<path>\t<label 0|1>\t<sha256>` lines. Relative paths are
// resolved against `base_dir`.
DatasetManifest read_manifest(const std::string& text,
                              const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& file);
std::string write_manifest(const DatasetManifest& manifest);

struct Split {
  DatasetManifest train;
  DatasetManifest test;
};

// Shuffles each class with a generator seeded by `seed`, truncates both to the
// smaller class, then splits each class by train_fraction (rounded to nearest)
// so both halves stay 1:1. Train and test are shuffled again from the same
// generator.
Split balance_and_split(const DatasetManifest& manifest, std::uint64_t seed,
                        double train_fraction);

// Lowercase hex SHA-256 of the file contents.
std::string compute_sha256(const std::filesystem::path& file);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Regular files below `root` whose name contains ".so", sorted by path.
std::vector<std::filesystem::path> collect_shared_libraries(
    const std::filesystem::path& root);

}  // namespace armgraph::prep
