#include "armgraph/tag_dictionary.hpp"

#include <charconv>
#include <sstream>

namespace armgraph::prep {

Tag TagDictionary::insert(const ByteString& bytes) {
  auto [it, inserted] = by_bytes_.emplace(bytes, static_cast<Tag>(by_tag_.size() + 1));
  if (inserted) by_tag_.push_back(bytes);
  return it->second;
}

std::optional<Tag> TagDictionary::find(const ByteString& bytes) const {
  auto it = by_bytes_.find(bytes);
  if (it == by_bytes_.end()) return std::nullopt;
  return it->second;
}

TagDictionary extend_tag_dictionary(std::span<const cfg::BasicBlock> blocks,
                                    TagDictionary dict) {
  for (const auto& b : blocks) dict.insert(b.byte_string);
  return dict;
}

std::string write_tag_dictionary(const TagDictionary& dict) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  Tag tag = 1;
  for (const auto& bytes : dict.entries()) {
    out += std::to_string(tag++);
    out += '\t';
    for (std::uint8_t b : bytes) {
      out += kHex[b >> 4];
      out += kHex[b & 0xf];
    }
    out += '\n';
  }
  return out;
}

TagDictionary read_tag_dictionary(const std::string& text) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  TagDictionary dict;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "tag dictionary line " + std::to_string(line_no) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw TagFileError(TagFileErrc::kParseError, where + "missing tab");
    Tag tag = 0;
    auto [end, ec] = std::from_chars(line.data(), line.data() + tab, tag);
    if (ec != std::errc() || end != line.data() + tab) {
      throw TagFileError(TagFileErrc::kParseError, where + "bad tag");
    }
    const std::string_view hex(line.data() + tab + 1, line.size() - tab - 1);
    if (hex.size() % 2 != 0) throw TagFileError(TagFileErrc::kParseError, where + "odd hex length");
    ByteString bytes;
    for (std::size_t i = 0; i < hex.size(); i += 2) {
      const int hi = nibble(hex[i]);
      const int lo = nibble(hex[i + 1]);
      if (hi < 0 || lo < 0) throw TagFileError(TagFileErrc::kParseError, where + "bad hex digit");
      bytes.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    if (dict.insert(bytes) != tag || dict.size() != tag) {
      throw TagFileError(TagFileErrc::kNotDense, where + "tags must be 1..n in order and unique");
    }
  }
  return dict;
}

}  // namespace armgraph::prep
