#pragma once

#include <filesystem>
#include <vector>

#include "armgraph/labeled_graph.hpp"
#include "armgraph/random.hpp"
#include "elf_builder.hpp"

namespace armgraph::testing {

// Random canonical undirected graph with tags in [0, max_tag] and a 0/1 label.
LabeledGraph random_graph(Rng& rng, std::size_t max_nodes, Tag max_tag);

// 10 triangles of tag-1 nodes labeled 0 and 10 three-node paths of tag-2
// nodes labeled 1.
std::vector<LabeledGraph> separable_dataset();

// Fixture ELFs with known call graphs.
ElfSpec three_function_program();       // foo, bar, main; bar->foo, main->foo, main->bar
ElfSpec self_loop_program();            // svc #0; b self
ElfSpec unresolved_jump_program();      // bx r3
// Malware-like samples fan out to syscall leaves; benign-like samples call a
// chain of plain leaves. `variant` changes the number of functions.
ElfSpec malware_like_program(int variant);
ElfSpec benign_like_program(int variant);

// Writes two samples of each class plus manifest.tsv into `dir` and returns
// the manifest path.
std::filesystem::path write_corpus(const std::filesystem::path& dir);

// Fresh empty directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace armgraph::testing
