#include "armgraph/dataset_format.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <string_view>

namespace armgraph::format {
namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next line, or false at end of input.
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto nl = text_.find('\n', pos_);
    const auto end = nl == std::string_view::npos ? text_.size() : nl;
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = nl == std::string_view::npos ? text_.size() : nl + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

  bool only_blank_lines_remain() {
    std::string_view line;
    while (next(line)) {
      if (line.find_first_not_of(" \t") != std::string_view::npos) return false;
    }
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

[[noreturn]] void fail(FormatErrc kind, std::size_t line, const std::string& msg) {
  throw FormatError(kind, "line " + std::to_string(line) + ": " + msg);
}

std::vector<std::uint64_t> numbers(std::string_view line, std::size_t line_no) {
  std::vector<std::uint64_t> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(line.data() + i, line.data() + line.size(), v);
    const std::size_t used = static_cast<std::size_t>(end - (line.data() + i));
    if (ec != std::errc() || used == 0 ||
        (i + used < line.size() && line[i + used] != ' ' && line[i + used] != '\t')) {
      fail(FormatErrc::kParseError, line_no,
           "expected a non-negative integer near \"" + std::string(line.substr(i, 16)) + "\"");
    }
    out.push_back(v);
    i += used;
  }
  return out;
}

}  // namespace

std::string write_dataset(const std::vector<LabeledGraph>& graphs) {
  std::string out = std::to_string(graphs.size()) + '\n';
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const LabeledGraph& g = graphs[gi];
    if (g.label != kMalwareLabel && g.label != kBenignLabel) {
      throw FormatError(FormatErrc::kInvalidGraph,
                        "graph " + std::to_string(gi) + ": label must be 0 or 1");
    }
    for (const auto& [u, v] : g.edges) {
      if (u >= g.node_count() || v >= g.node_count()) {
        throw FormatError(FormatErrc::kInvalidGraph,
                          "graph " + std::to_string(gi) + ": edge endpoint out of range");
      }
    }
    out += std::to_string(g.node_count()) + ' ' + std::to_string(g.label) + '\n';
    const auto adj = neighbor_lists(g);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      out += std::to_string(g.node_tags[i]) + ' ' + std::to_string(adj[i].size());
      for (NodeIndex j : adj[i]) out += ' ' + std::to_string(j);
      out += '\n';
    }
  }
  return out;
}

GraphDataset read_dataset(const std::string& text) {
  if (text.empty()) fail(FormatErrc::kParseError, 1, "empty input");
  LineReader lines(text);
  std::string_view line;
  GraphDataset ds;

  if (!lines.next(line)) fail(FormatErrc::kParseError, 1, "missing graph count");
  const auto header = numbers(line, lines.line_no());
  if (header.size() != 1) fail(FormatErrc::kParseError, lines.line_no(), "expected graph count");
  const std::uint64_t graph_count = header[0];

  for (std::uint64_t gi = 0; gi < graph_count; ++gi) {
    if (!lines.next(line)) {
      fail(FormatErrc::kParseError, lines.line_no() + 1,
           "expected " + std::to_string(graph_count) + " graphs, found " + std::to_string(gi));
    }
    const std::size_t graph_line = lines.line_no();
    const auto gh = numbers(line, graph_line);
    if (gh.size() != 2) fail(FormatErrc::kParseError, graph_line, "expected \"n label\"");
    if (gh[1] > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      fail(FormatErrc::kParseError, graph_line, "label too large");
    }
    const std::uint64_t n = gh[0];
    if (n > std::numeric_limits<NodeIndex>::max()) {
      fail(FormatErrc::kParseError, graph_line, "node count too large");
    }

    LabeledGraph g;
    g.label = static_cast<int>(gh[1]);
    if (std::find(ds.label_universe.begin(), ds.label_universe.end(), g.label) ==
        ds.label_universe.end()) {
      ds.label_universe.push_back(g.label);
    }

    std::vector<std::vector<NodeIndex>> listed(n);
    std::vector<std::size_t> node_lines(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      if (!lines.next(line)) {
        fail(FormatErrc::kConsistencyError, lines.line_no() + 1,
             "graph declares " + std::to_string(n) + " nodes but only " + std::to_string(i) +
                 " node lines follow");
      }
      node_lines[i] = lines.line_no();
      const auto v = numbers(line, lines.line_no());
      if (v.size() < 2) fail(FormatErrc::kParseError, lines.line_no(), "expected \"tag m ...\"");
      if (v[0] > std::numeric_limits<Tag>::max()) {
        fail(FormatErrc::kParseError, lines.line_no(), "tag too large");
      }
      if (v.size() - 2 != v[1]) {
        fail(FormatErrc::kConsistencyError, lines.line_no(),
             "neighbor count " + std::to_string(v[1]) + " but " + std::to_string(v.size() - 2) +
                 " indices listed");
      }
      g.node_tags.push_back(static_cast<Tag>(v[0]));
      for (std::size_t k = 2; k < v.size(); ++k) {
        if (v[k] >= n) {
          fail(FormatErrc::kIndexOutOfRange, lines.line_no(),
               "neighbor index " + std::to_string(v[k]) + " outside 0.." +
                   std::to_string(n == 0 ? 0 : n - 1));
        }
        listed[i].push_back(static_cast<NodeIndex>(v[k]));
      }
      auto& l = listed[i];
      std::sort(l.begin(), l.end());
      if (std::adjacent_find(l.begin(), l.end()) != l.end()) {
        fail(FormatErrc::kConsistencyError, lines.line_no(), "neighbor listed twice");
      }
    }

    for (NodeIndex i = 0; i < n; ++i) {
      for (NodeIndex j : listed[i]) {
        if (!std::binary_search(listed[j].begin(), listed[j].end(), i)) {
          fail(FormatErrc::kConsistencyError, node_lines[i],
               "node " + std::to_string(i) + " lists " + std::to_string(j) +
                   " but node " + std::to_string(j) + " does not list " + std::to_string(i));
        }
        if (i <= j) g.edges.emplace_back(i, j);
      }
    }
    std::sort(g.edges.begin(), g.edges.end());
    ds.graphs.push_back(std::move(g));
  }

  if (!lines.only_blank_lines_remain()) {
    fail(FormatErrc::kParseError, lines.line_no(), "unexpected content after the last graph");
  }
  return ds;
}

}  // namespace armgraph::format
