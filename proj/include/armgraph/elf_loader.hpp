#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "armgraph/error.hpp"

namespace armgraph::elf {

using Address = std::uint64_t;

enum class ElfErrc {
  kBadMagic,
  kUnsupportedClass,
  kUnsupportedEndianness,
  kUnsupportedMachine,
  kUnsupportedFileType,
  kTruncated,
  kInvalidLayout,
  kMissingLibrary,
  kIoError,
};

using ElfError = Error<ElfErrc>;

const char* to_string(ElfErrc e);

enum SectionFlag : std::uint8_t {
  kReadable = 1u << 0,
  kWritable = 1u << 1,
  kExecutable = 1u << 2,
};

// An allocated section of the image. NOBITS sections (.bss) carry a size but
// no bytes; every other section has bytes.size() == size.
struct Section {
  std::string name;
  Address vaddr = 0;
  std::uint64_t size = 0;
  std::uint8_t flags = 0;
  std::vector<std::uint8_t> bytes;

  bool executable() const { return (flags & kExecutable) != 0; }
  bool writable() const { return (flags & kWritable) != 0; }
  bool has_bytes() const { return bytes.size() == size; }
  bool contains(Address a) const { return a >= vaddr && a - vaddr < size; }

  bool operator==(const Section&) const = default;
};

enum class SymbolKind { kFunction, kObject, kOther };

struct Symbol {
  std::string name;
  Address vaddr = 0;
  SymbolKind kind = SymbolKind::kOther;
  std::uint64_t size = 0;
  // False for imports (SHN_UNDEF). An import may still carry a nonzero vaddr
  // when the linker emitted a canonical PLT entry for it.
  bool defined = true;

  bool operator==(const Symbol&) const = default;
};

enum class FileType { kExecutable, kSharedObject };

// A parsed 32-bit little-endian ARM ELF file. Immutable after parsing.
struct BinaryImage {
  std::string path;
  FileType type = FileType::kExecutable;
  Address entry_point = 0;
  std::vector<Section> sections;
  std::vector<Symbol> symbols;
  std::vector<std::string> needed_libraries;
  bool is_dynamic = false;

  // Section holding `a` among sections with loaded bytes, or nullptr.
  const Section* section_at(Address a) const;
  const Section* executable_section_at(Address a) const;
  bool operator==(const BinaryImage&) const = default;
};

// Parses an ELF image from memory. Throws ElfError on malformed or unsupported
// input; never reads outside `raw`.
BinaryImage parse_executable(std::span<const std::uint8_t> raw,
                             std::string path = {});

BinaryImage load_executable(const std::filesystem::path& path);

// Loads every DT_NEEDED library reachable from `image`, breadth first. Each
// name resolves to the first search path holding a file of that name and is
// loaded at most once. With strict set, an unresolved name throws
// kMissingLibrary; otherwise it is skipped.
std::vector<BinaryImage> resolve_dependencies(
    const BinaryImage& image,
    const std::vector<std::filesystem::path>& search_paths, bool strict);

}  // namespace armgraph::elf
