#include "armgraph/elf_loader.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

namespace armgraph::elf {
namespace {

constexpr std::size_t kEhdrSize = 52;
constexpr std::size_t kShdrSize = 40;
constexpr std::size_t kPhdrSize = 32;
constexpr std::size_t kSymSize = 16;
constexpr std::size_t kDynSize = 8;

constexpr std::uint16_t kEtExec = 2;
constexpr std::uint16_t kEtDyn = 3;
constexpr std::uint16_t kEmArm = 40;

constexpr std::uint32_t kShtSymtab = 2;
constexpr std::uint32_t kShtDynamic = 6;
constexpr std::uint32_t kShtNobits = 8;
constexpr std::uint32_t kShtDynsym = 11;

constexpr std::uint32_t kShfWrite = 0x1;
constexpr std::uint32_t kShfAlloc = 0x2;
constexpr std::uint32_t kShfExecinstr = 0x4;

constexpr std::uint32_t kPtLoad = 1;
constexpr std::uint32_t kPtDynamic = 2;
constexpr std::uint32_t kPtInterp = 3;

constexpr std::uint32_t kDtNull = 0;
constexpr std::uint32_t kDtNeeded = 1;
constexpr std::uint32_t kDtStrtab = 5;

constexpr std::uint16_t kShnUndef = 0;
constexpr std::uint16_t kShnLoReserve = 0xff00;

[[noreturn]] void fail(ElfErrc kind, const std::string& msg) {
  throw ElfError(kind, msg);
}

// Bounds-checked little-endian view over the raw file.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t size() const { return data_.size(); }

  bool in_range(std::uint64_t offset, std::uint64_t length) const {
    return offset <= data_.size() && length <= data_.size() - offset;
  }

  void require(std::uint64_t offset, std::uint64_t length,
               const char* what) const {
    if (!in_range(offset, length)) {
      std::ostringstream os;
      os << what << " at offset " << offset << " (+" << length
         << ") exceeds input of " << data_.size() << " bytes";
      fail(ElfErrc::kTruncated, os.str());
    }
  }

  std::uint8_t u8(std::uint64_t off) const {
    require(off, 1, "byte");
    return data_[off];
  }
  std::uint16_t u16(std::uint64_t off) const {
    require(off, 2, "half-word");
    return static_cast<std::uint16_t>(data_[off] | (data_[off + 1] << 8));
  }
  std::uint32_t u32(std::uint64_t off) const {
    require(off, 4, "word");
    return static_cast<std::uint32_t>(data_[off]) |
           (static_cast<std::uint32_t>(data_[off + 1]) << 8) |
           (static_cast<std::uint32_t>(data_[off + 2]) << 16) |
           (static_cast<std::uint32_t>(data_[off + 3]) << 24);
  }

  std::vector<std::uint8_t> bytes(std::uint64_t off, std::uint64_t len,
                                  const char* what) const {
    require(off, len, what);
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(off);
    return {first, first + static_cast<std::ptrdiff_t>(len)};
  }

  // NUL-terminated string inside [table, table + table_size).
  std::string cstring(std::uint64_t table, std::uint64_t table_size,
                      std::uint64_t index) const {
    require(table, table_size, "string table");
    if (index >= table_size) {
      fail(ElfErrc::kTruncated, "string index outside its table");
    }
    std::string out;
    for (std::uint64_t i = table + index; i < table + table_size; ++i) {
      if (data_[i] == 0) return out;
      out.push_back(static_cast<char>(data_[i]));
    }
    fail(ElfErrc::kTruncated, "unterminated string in string table");
  }

 private:
  std::span<const std::uint8_t> data_;
};

struct SectionHeader {
  std::uint32_t name = 0;
  std::uint32_t type = 0;
  std::uint32_t flags = 0;
  std::uint32_t addr = 0;
  std::uint32_t offset = 0;
  std::uint32_t size = 0;
  std::uint32_t link = 0;
  std::uint32_t entsize = 0;
};

struct ProgramHeader {
  std::uint32_t type = 0;
  std::uint32_t offset = 0;
  std::uint32_t vaddr = 0;
  std::uint32_t filesz = 0;
  std::uint32_t memsz = 0;
  std::uint32_t flags = 0;
};

void check_ident(const Reader& r) {
  static constexpr std::uint8_t kMagic[4] = {0x7f, 'E', 'L', 'F'};
  const std::size_t avail = std::min<std::size_t>(r.size(), 4);
  for (std::size_t i = 0; i < avail; ++i) {
    if (r.u8(i) != kMagic[i]) fail(ElfErrc::kBadMagic, "not an ELF file");
  }
  if (avail < 4) fail(ElfErrc::kTruncated, "input shorter than ELF magic");
  const std::uint8_t cls = r.u8(4);
  if (cls != 1) {
    fail(ElfErrc::kUnsupportedClass,
         "only 32-bit ELF is supported (EI_CLASS=" + std::to_string(cls) + ")");
  }
  const std::uint8_t data = r.u8(5);
  if (data != 1) {
    fail(ElfErrc::kUnsupportedEndianness,
         "only little-endian ELF is supported (EI_DATA=" +
             std::to_string(data) + ")");
  }
  r.require(0, kEhdrSize, "ELF header");
}

std::vector<SectionHeader> read_section_headers(const Reader& r,
                                                std::uint32_t shoff,
                                                std::uint16_t shnum,
                                                std::uint16_t shentsize) {
  std::vector<SectionHeader> out;
  if (shnum == 0) return out;
  if (shentsize < kShdrSize) {
    fail(ElfErrc::kTruncated, "section header entries are too small");
  }
  r.require(shoff, std::uint64_t{shnum} * shentsize, "section header table");
  out.reserve(shnum);
  for (std::uint16_t i = 0; i < shnum; ++i) {
    const std::uint64_t at = shoff + std::uint64_t{i} * shentsize;
    SectionHeader h;
    h.name = r.u32(at + 0);
    h.type = r.u32(at + 4);
    h.flags = r.u32(at + 8);
    h.addr = r.u32(at + 12);
    h.offset = r.u32(at + 16);
    h.size = r.u32(at + 20);
    h.link = r.u32(at + 24);
    h.entsize = r.u32(at + 36);
    out.push_back(h);
  }
  return out;
}

std::vector<ProgramHeader> read_program_headers(const Reader& r,
                                                std::uint32_t phoff,
                                                std::uint16_t phnum,
                                                std::uint16_t phentsize) {
  std::vector<ProgramHeader> out;
  if (phnum == 0) return out;
  if (phentsize < kPhdrSize) {
    fail(ElfErrc::kTruncated, "program header entries are too small");
  }
  r.require(phoff, std::uint64_t{phnum} * phentsize, "program header table");
  for (std::uint16_t i = 0; i < phnum; ++i) {
    const std::uint64_t at = phoff + std::uint64_t{i} * phentsize;
    ProgramHeader p;
    p.type = r.u32(at + 0);
    p.offset = r.u32(at + 4);
    p.vaddr = r.u32(at + 8);
    p.filesz = r.u32(at + 16);
    p.memsz = r.u32(at + 20);
    p.flags = r.u32(at + 24);
    out.push_back(p);
  }
  return out;
}

std::uint8_t section_flags(std::uint32_t shf) {
  std::uint8_t f = kReadable;
  if (shf & kShfWrite) f |= kWritable;
  if (shf & kShfExecinstr) f |= kExecutable;
  return f;
}

// Sections synthesized from PT_LOAD segments when the file has no section
// header table (common for stripped firmware).
std::vector<Section> sections_from_segments(
    const Reader& r, const std::vector<ProgramHeader>& phdrs) {
  std::vector<Section> out;
  int index = 0;
  for (const auto& p : phdrs) {
    if (p.type != kPtLoad || p.memsz == 0) continue;
    if (p.filesz > p.memsz) {
      fail(ElfErrc::kInvalidLayout, "segment file size exceeds memory size");
    }
    Section s;
    s.name = "LOAD" + std::to_string(index++);
    s.vaddr = p.vaddr;
    s.size = p.memsz;
    s.flags = 0;
    if (p.flags & 0x4) s.flags |= kReadable;
    if (p.flags & 0x2) s.flags |= kWritable;
    if (p.flags & 0x1) s.flags |= kExecutable;
    s.bytes = r.bytes(p.offset, p.filesz, "segment contents");
    s.bytes.resize(p.memsz, 0);
    out.push_back(std::move(s));
  }
  return out;
}

// Translates a virtual address to a file offset through PT_LOAD segments.
std::optional<std::uint64_t> vaddr_to_offset(
    const std::vector<ProgramHeader>& phdrs, std::uint64_t vaddr) {
  for (const auto& p : phdrs) {
    if (p.type == kPtLoad && vaddr >= p.vaddr && vaddr - p.vaddr < p.filesz) {
      return p.offset + (vaddr - p.vaddr);
    }
  }
  return std::nullopt;
}

std::vector<std::string> needed_from_dynamic(const Reader& r,
                                             std::uint64_t dyn_off,
                                             std::uint64_t dyn_size,
                                             std::uint64_t str_off,
                                             std::uint64_t str_size) {
  std::vector<std::string> needed;
  r.require(dyn_off, dyn_size, "dynamic table");
  for (std::uint64_t at = dyn_off; at + kDynSize <= dyn_off + dyn_size;
       at += kDynSize) {
    const std::uint32_t tag = r.u32(at);
    const std::uint32_t val = r.u32(at + 4);
    if (tag == kDtNull) break;
    if (tag == kDtNeeded) needed.push_back(r.cstring(str_off, str_size, val));
  }
  return needed;
}

void check_layout(const BinaryImage& img) {
  std::vector<const Section*> loaded;
  for (const auto& s : img.sections) {
    if (s.size > 0 && s.has_bytes()) loaded.push_back(&s);
  }
  std::sort(loaded.begin(), loaded.end(),
            [](const Section* a, const Section* b) { return a->vaddr < b->vaddr; });
  for (std::size_t i = 1; i < loaded.size(); ++i) {
    if (loaded[i - 1]->vaddr + loaded[i - 1]->size > loaded[i]->vaddr) {
      fail(ElfErrc::kInvalidLayout, "sections " + loaded[i - 1]->name +
                                        " and " + loaded[i]->name + " overlap");
    }
  }
  if (img.type == FileType::kExecutable &&
      img.executable_section_at(img.entry_point) == nullptr) {
    std::ostringstream os;
    os << "entry point 0x" << std::hex << img.entry_point
       << " is not inside an executable section";
    fail(ElfErrc::kInvalidLayout, os.str());
  }
}

}  // namespace

const char* to_string(ElfErrc e) {
  switch (e) {
    case ElfErrc::kBadMagic: return "BadMagic";
    case ElfErrc::kUnsupportedClass: return "UnsupportedClass";
    case ElfErrc::kUnsupportedEndianness: return "UnsupportedEndianness";
    case ElfErrc::kUnsupportedMachine: return "UnsupportedMachine";
    case ElfErrc::kUnsupportedFileType: return "UnsupportedFileType";
    case ElfErrc::kTruncated: return "Truncated";
    case ElfErrc::kInvalidLayout: return "InvalidLayout";
    case ElfErrc::kMissingLibrary: return "MissingLibrary";
    case ElfErrc::kIoError: return "IoError";
  }
  return "Unknown";
}

const Section* BinaryImage::section_at(Address a) const {
  for (const auto& s : sections) {
    if (s.has_bytes() && s.contains(a)) return &s;
  }
  return nullptr;
}

const Section* BinaryImage::executable_section_at(Address a) const {
  const Section* s = section_at(a);
  return (s != nullptr && s->executable()) ? s : nullptr;
}

BinaryImage parse_executable(std::span<const std::uint8_t> raw,
                             std::string path) {
  const Reader r(raw);
  if (raw.empty()) fail(ElfErrc::kTruncated, "empty input");
  check_ident(r);

  const std::uint16_t e_type = r.u16(16);
  const std::uint16_t e_machine = r.u16(18);
  if (e_machine != kEmArm) {
    fail(ElfErrc::kUnsupportedMachine,
         "only ARM is supported (e_machine=" + std::to_string(e_machine) + ")");
  }
  if (e_type != kEtExec && e_type != kEtDyn) {
    fail(ElfErrc::kUnsupportedFileType,
         "only executables and shared objects are supported (e_type=" +
             std::to_string(e_type) + ")");
  }

  BinaryImage img;
  img.path = std::move(path);
  img.type = e_type == kEtExec ? FileType::kExecutable : FileType::kSharedObject;
  img.entry_point = r.u32(24);
  const std::uint32_t phoff = r.u32(28);
  const std::uint32_t shoff = r.u32(32);
  const std::uint16_t phentsize = r.u16(42);
  const std::uint16_t phnum = r.u16(44);
  const std::uint16_t shentsize = r.u16(46);
  const std::uint16_t shnum = r.u16(48);
  const std::uint16_t shstrndx = r.u16(50);

  const auto phdrs = read_program_headers(r, phoff, phnum, phentsize);
  const auto shdrs = read_section_headers(r, shoff, shnum, shentsize);
  for (const auto& p : phdrs) {
    if (p.type == kPtDynamic || p.type == kPtInterp) img.is_dynamic = true;
  }

  if (shdrs.empty()) {
    img.sections = sections_from_segments(r, phdrs);
    for (const auto& p : phdrs) {
      if (p.type != kPtDynamic) continue;
      const auto dyn_off = vaddr_to_offset(phdrs, p.vaddr);
      if (!dyn_off) continue;
      std::optional<std::uint64_t> str_off;
      r.require(*dyn_off, p.filesz, "dynamic segment");
      for (std::uint64_t at = *dyn_off; at + kDynSize <= *dyn_off + p.filesz;
           at += kDynSize) {
        if (r.u32(at) == kDtStrtab) str_off = vaddr_to_offset(phdrs, r.u32(at + 4));
      }
      if (str_off) {
        const std::uint64_t str_size = r.size() - *str_off;
        img.needed_libraries =
            needed_from_dynamic(r, *dyn_off, p.filesz, *str_off, str_size);
      }
    }
    check_layout(img);
    return img;
  }

  if (shstrndx >= shdrs.size()) {
    fail(ElfErrc::kTruncated, "section name table index out of range");
  }
  const SectionHeader& names = shdrs[shstrndx];
  auto section_name = [&](const SectionHeader& h) {
    return r.cstring(names.offset, names.size, h.name);
  };
  auto string_table = [&](std::uint32_t link) -> const SectionHeader& {
    if (link >= shdrs.size()) {
      fail(ElfErrc::kTruncated, "string table link out of range");
    }
    return shdrs[link];
  };

  // Loaded sections keep their section-header index for symbol lookup.
  std::vector<int> loaded_index(shdrs.size(), -1);
  for (std::size_t i = 0; i < shdrs.size(); ++i) {
    const auto& h = shdrs[i];
    if (!(h.flags & kShfAlloc)) continue;
    Section s;
    s.name = section_name(h);
    s.vaddr = h.addr;
    s.size = h.size;
    s.flags = section_flags(h.flags);
    if (h.type != kShtNobits) s.bytes = r.bytes(h.offset, h.size, "section contents");
    loaded_index[i] = static_cast<int>(img.sections.size());
    img.sections.push_back(std::move(s));
  }

  std::set<std::pair<std::string, Address>> seen;
  auto read_symbols = [&](const SectionHeader& h) {
    if (h.entsize != 0 && h.entsize < kSymSize) {
      fail(ElfErrc::kTruncated, "symbol entries are too small");
    }
    const std::uint64_t stride = h.entsize == 0 ? kSymSize : h.entsize;
    const SectionHeader& strtab = string_table(h.link);
    r.require(h.offset, h.size, "symbol table");
    // Entry 0 is the reserved null symbol.
    for (std::uint64_t at = h.offset + stride; at + kSymSize <= h.offset + h.size;
         at += stride) {
      const std::uint32_t st_name = r.u32(at);
      std::uint32_t value = r.u32(at + 4);
      const std::uint32_t size = r.u32(at + 8);
      const std::uint8_t info = r.u8(at + 12);
      const std::uint16_t shndx = r.u16(at + 14);
      const std::uint8_t stt = info & 0xf;
      if (stt == 3 || stt == 4) continue;  // STT_SECTION, STT_FILE
      std::string name = r.cstring(strtab.offset, strtab.size, st_name);
      if (name.empty() || name.front() == '$') continue;  // mapping symbols

      Symbol sym;
      sym.kind = stt == 2   ? SymbolKind::kFunction
                 : stt == 1 ? SymbolKind::kObject
                            : SymbolKind::kOther;
      if (sym.kind == SymbolKind::kFunction) value &= ~1u;
      sym.name = std::move(name);
      sym.vaddr = value;
      sym.size = size;
      sym.defined = shndx != kShnUndef;
      if (!sym.defined) {
        if (sym.vaddr != 0 && img.section_at(sym.vaddr) == nullptr) sym.vaddr = 0;
      } else {
        if (shndx >= kShnLoReserve || img.section_at(sym.vaddr) == nullptr) continue;
        if (sym.kind == SymbolKind::kFunction &&
            img.executable_section_at(sym.vaddr) == nullptr) {
          continue;
        }
      }
      if (!seen.emplace(sym.name, sym.vaddr).second) continue;
      img.symbols.push_back(std::move(sym));
    }
  };
  for (const auto& h : shdrs) {
    if (h.type == kShtSymtab) read_symbols(h);
  }
  for (const auto& h : shdrs) {
    if (h.type == kShtDynsym) read_symbols(h);
  }

  for (const auto& h : shdrs) {
    if (h.type != kShtDynamic) continue;
    img.is_dynamic = true;
    const SectionHeader& strtab = string_table(h.link);
    img.needed_libraries =
        needed_from_dynamic(r, h.offset, h.size, strtab.offset, strtab.size);
  }

  check_layout(img);
  return img;
}

BinaryImage load_executable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ElfErrc::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (in.bad()) fail(ElfErrc::kIoError, "cannot read " + path.string());
  return parse_executable(raw, path.string());
}

std::vector<BinaryImage> resolve_dependencies(
    const BinaryImage& image,
    const std::vector<std::filesystem::path>& search_paths, bool strict) {
  std::vector<BinaryImage> loaded;
  std::unordered_set<std::string> visited;
  std::deque<std::string> pending(image.needed_libraries.begin(),
                                  image.needed_libraries.end());
  while (!pending.empty()) {
    std::string name = std::move(pending.front());
    pending.pop_front();
    if (!visited.insert(name).second) continue;

    std::optional<std::filesystem::path> found;
    for (const auto& dir : search_paths) {
      std::error_code ec;
      const auto candidate = dir / name;
      if (std::filesystem::is_regular_file(candidate, ec)) {
        found = candidate;
        break;
      }
    }
    if (!found) {
      if (strict) fail(ElfErrc::kMissingLibrary, "library not found: " + name);
      continue;
    }
    BinaryImage lib = load_executable(*found);
    for (const auto& dep : lib.needed_libraries) pending.push_back(dep);
    loaded.push_back(std::move(lib));
  }
  return loaded;
}

}  // namespace armgraph::elf
