#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armgraph/cfg_recovery.hpp"
#include "armgraph/error.hpp"
#include "armgraph/labeled_graph.hpp"

namespace armgraph::prep {

using ByteString = std::vector<std::uint8_t>;

// Global injective map from basic-block bytes to tags 1..size(), assigned in
// insertion order. Tag 0 is never assigned; models use it for unseen blocks.
class TagDictionary {
 public:
  // Returns the tag of `bytes`, assigning size() + 1 if it is new.
  Tag insert(const ByteString& bytes);
  std::optional<Tag> find(const ByteString& bytes) const;

  std::size_t size() const { return by_tag_.size(); }
  bool empty() const { return by_tag_.empty(); }
  // Entries in tag order; element i has tag i + 1.
  const std::vector<ByteString>& entries() const { return by_tag_; }

  bool operator==(const TagDictionary& other) const { return by_tag_ == other.by_tag_; }

 private:
  std::map<ByteString, Tag> by_bytes_;
  std::vector<ByteString> by_tag_;
};

TagDictionary extend_tag_dictionary(std::span<const cfg::BasicBlock> blocks,
                                    TagDictionary dict);

enum class TagFileErrc { kParseError, kNotDense };
using TagFileError = Error<TagFileErrc>;

// `<tag>\t<hex bytes>` per line, ascending tag.
std::string write_tag_dictionary(const TagDictionary& dict);
TagDictionary read_tag_dictionary(const std::string& text);

}  // namespace armgraph::prep
