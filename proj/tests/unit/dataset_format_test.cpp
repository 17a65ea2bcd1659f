#include <doctest.h>

#include "armgraph/dataset_format.hpp"
#include "synthetic.hpp"

using namespace armgraph;
using namespace armgraph::format;

namespace {

FormatErrc error_of(const std::string& text) {
  try {
    read_dataset(text);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("read succeeded");
  return FormatErrc::kInvalidGraph;
}

}  // namespace

TEST_CASE("writer examples") {
  CHECK(write_dataset({}) == "0\n");
  CHECK(write_dataset({{{7}, {}, 0}}) == "1\n1 0\n7 0\n");
  CHECK(write_dataset({{{1, 2}, {{0, 1}}, 1}}) == "1\n2 1\n1 1 1\n2 1 0\n");
  CHECK(write_dataset({{{3}, {{0, 0}}, 0}}) == "1\n1 0\n3 1 0\n");
}

TEST_CASE("reader examples") {
  CHECK(read_dataset("0\n").graphs.empty());
  const std::vector<LabeledGraph> two = {{{7}, {}, 0}, {{1, 2}, {{0, 1}}, 1}};
  const auto back = read_dataset(write_dataset(two));
  CHECK(back.graphs == two);
  CHECK(back.label_universe == std::vector<int>{0, 1});
  CHECK(error_of("1\n2 1\n1 1 1\n2 0\n") == FormatErrc::kConsistencyError);
}

TEST_CASE("reader accepts any non-negative label") {
  const auto d = read_dataset("2\n1 4\n1 0\n1 2\n1 0\n");
  CHECK(d.label_universe == std::vector<int>{4, 2});
}

TEST_CASE("malformed input") {
  CHECK(error_of("") == FormatErrc::kParseError);
  CHECK(error_of("x\n") == FormatErrc::kParseError);
  CHECK(error_of("1\n1 0\n7 x\n") == FormatErrc::kParseError);
  CHECK(error_of("1\n1 -1\n7 0\n") == FormatErrc::kParseError);
  CHECK(error_of("1\n1 0\n7 1 5\n") == FormatErrc::kIndexOutOfRange);
  CHECK(error_of("1\n1 0\n7 2 0\n") == FormatErrc::kConsistencyError);
  CHECK(error_of("1\n2 0\n7 0\n") == FormatErrc::kConsistencyError);
  CHECK(error_of("1\n2 0\n1 2 1 1\n1 1 0\n") == FormatErrc::kConsistencyError);
  CHECK(error_of("1\n1 0\n7 0\n9 0\n") == FormatErrc::kParseError);
  CHECK(error_of("2\n1 0\n7 0\n") == FormatErrc::kParseError);
}

TEST_CASE("errors carry the line number") {
  try {
    read_dataset("1\n1 0\n7 x\n");
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("writer rejects invalid graphs") {
  CHECK_THROWS_AS(write_dataset({{{1}, {}, 2}}), FormatError);
  CHECK_THROWS_AS(write_dataset({{{1}, {{0, 1}}, 0}}), FormatError);
}

TEST_CASE("random round-trip") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    std::vector<LabeledGraph> graphs(uniform_index(rng, 6));
    for (auto& g : graphs) g = testing::random_graph(rng, 20, 9);
    const auto text = write_dataset(graphs);
    CHECK(read_dataset(text).graphs == graphs);
    CHECK(write_dataset(read_dataset(text).graphs) == text);
  }
}
