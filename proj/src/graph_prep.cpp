#include "armgraph/graph_prep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "armgraph/random.hpp"

namespace armgraph {

LabeledGraph to_undirected(LabeledGraph g) {
  for (auto& [u, v] : g.edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

std::vector<std::vector<NodeIndex>> neighbor_lists(const LabeledGraph& g) {
  std::vector<std::vector<NodeIndex>> out(g.node_count());
  for (const auto& [u, v] : g.edges) {
    out[u].push_back(v);
    if (u != v) out[v].push_back(u);
  }
  for (auto& n : out) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return out;
}

}  // namespace armgraph

namespace armgraph::prep {
namespace {

std::string hex(cfg::Address a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

Tag tag_of(const cfg::BasicBlock& block, const TagDictionary& dict) {
  const auto tag = dict.find(block.byte_string);
  if (!tag) {
    throw PrepError(PrepErrc::kUnknownTag,
                    "block " + hex(block.start) + " has no tag in the dictionary");
  }
  return *tag;
}

}  // namespace

cfg::CallGraph drop_library_functions(const cfg::CallGraph& cg,
                                      const std::vector<cfg::FunctionInfo>& functions) {
  std::set<cfg::Address> excluded;
  for (const auto& f : functions) {
    if (f.origin != cfg::FunctionOrigin::kImage) excluded.insert(f.entry);
  }
  cfg::CallGraph out;
  for (cfg::Address n : cg.nodes) {
    if (!excluded.contains(n)) out.nodes.insert(n);
  }
  for (const auto& e : cg.edges) {
    if (!excluded.contains(e.first) && !excluded.contains(e.second)) out.edges.insert(e);
  }
  return out;
}

std::vector<cfg::BasicBlock> taggable_blocks(const cfg::RecoveryResult& recovery,
                                             bool include_library_code) {
  std::vector<cfg::BasicBlock> out;
  for (const auto& [start, block] : recovery.cfg.nodes) {
    auto it = recovery.block_origin.find(start);
    const bool image = it == recovery.block_origin.end() ||
                       it->second == cfg::FunctionOrigin::kImage;
    if (image || include_library_code) out.push_back(block);
  }
  return out;
}

LabeledGraph select_call_graph_nodes(const cfg::ControlFlowGraph& cfg,
                                     const cfg::CallGraph& cg,
                                     const TagDictionary& dict) {
  LabeledGraph g;
  std::map<cfg::Address, NodeIndex> index;
  for (cfg::Address entry : cg.nodes) {
    const cfg::BasicBlock* block = cfg.block_at(entry);
    if (block == nullptr) {
      throw PrepError(PrepErrc::kMissingBlock,
                      "call-graph node " + hex(entry) + " has no CFG block");
    }
    index.emplace(entry, static_cast<NodeIndex>(g.node_tags.size()));
    g.node_tags.push_back(tag_of(*block, dict));
  }
  for (const auto& [caller, callee] : cg.edges) {
    auto a = index.find(caller);
    auto b = index.find(callee);
    if (a == index.end() || b == index.end()) {
      throw PrepError(PrepErrc::kMissingBlock, "call edge " + hex(caller) + " -> " +
                                                   hex(callee) + " leaves the graph");
    }
    g.edges.emplace_back(a->second, b->second);
  }
  return g;
}

LabeledGraph cfg_to_labeled_graph(const cfg::ControlFlowGraph& cfg,
                                  const TagDictionary& dict) {
  LabeledGraph g;
  std::map<cfg::Address, NodeIndex> index;
  for (const auto& [start, block] : cfg.nodes) {
    index.emplace(start, static_cast<NodeIndex>(g.node_tags.size()));
    g.node_tags.push_back(tag_of(block, dict));
  }
  for (const auto& e : cfg.edges) {
    g.edges.emplace_back(index.at(e.src), index.at(e.dst));
  }
  return g;
}

DatasetManifest read_manifest(const std::string& text,
                              const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = "manifest line " + std::to_string(line_no) + ": ";
    std::vector<std::string> fields;
    std::size_t pos = 0;
    for (;;) {
      const auto tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) {
      throw PrepError(PrepErrc::kInvalidManifest, where + "expected 4 tab-separated fields");
    }
    ManifestRecord r;
    r.sample_id = fields[0];
    if (r.sample_id.empty() || !ids.insert(r.sample_id).second) {
      throw PrepError(PrepErrc::kInvalidManifest, where + "empty or duplicate sample id");
    }
    r.path = fields[1];
    if (r.path.is_relative() && !base_dir.empty()) r.path = base_dir / r.path;
    if (fields[2] == "0") r.label = kMalwareLabel;
    else if (fields[2] == "1") r.label = kBenignLabel;
    else throw PrepError(PrepErrc::kInvalidManifest, where + "label must be 0 or 1");
    r.sha256 = fields[3];
    const bool hex_ok = r.sha256.size() == 64 &&
                        std::all_of(r.sha256.begin(), r.sha256.end(), [](char c) {
                          return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
                        });
    if (!hex_ok) {
      throw PrepError(PrepErrc::kInvalidManifest, where + "sha256 must be 64 lowercase hex digits");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw PrepError(PrepErrc::kIoError, "cannot open manifest " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_manifest(ss.str(), file.parent_path());
}

std::string write_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += r.sample_id + '\t' + r.path.string() + '\t' + std::to_string(r.label) + '\t' +
           r.sha256 + '\n';
  }
  return out;
}

Split balance_and_split(const DatasetManifest& manifest, std::uint64_t seed,
                        double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw PrepError(PrepErrc::kInvalidManifest, "train fraction must lie in (0, 1)");
  }
  std::vector<ManifestRecord> malware;
  std::vector<ManifestRecord> benign;
  for (const auto& r : manifest.records) {
    (r.label == kMalwareLabel ? malware : benign).push_back(r);
  }
  if (malware.empty() || benign.empty()) {
    throw PrepError(PrepErrc::kEmptyClass,
                    std::string("manifest has no ") + (malware.empty() ? "malware" : "benign") +
                        " samples");
  }

  Rng rng(seed);
  shuffle(std::span(malware), rng);
  shuffle(std::span(benign), rng);
  const std::size_t per_class = std::min(malware.size(), benign.size());
  const auto train_per_class = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(per_class)));

  Split split;
  for (const auto* cls : {&malware, &benign}) {
    for (std::size_t i = 0; i < per_class; ++i) {
      (i < train_per_class ? split.train : split.test).records.push_back((*cls)[i]);
    }
  }
  shuffle(std::span(split.train.records), rng);
  shuffle(std::span(split.test.records), rng);
  return split;
}

}  // namespace armgraph::prep
