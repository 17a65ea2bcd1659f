#pragma once

// Hand-laid ELF32 ARM images for tests. Only the pieces the loader reads are
// emitted: one PT_LOAD per allocated section, optional symbol tables and a
// dynamic table with DT_NEEDED entries.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace armgraph::testing {

struct SectionSpec {
  std::string name;
  std::uint32_t vaddr = 0;
  std::vector<std::uint8_t> bytes;
  bool executable = true;
  bool writable = false;
  std::uint32_t nobits_size = 0;  // nonzero: SHT_NOBITS of this size, bytes ignored
};

struct SymbolSpec {
  std::string name;
  std::uint32_t value = 0;
  std::uint32_t size = 0;
  std::uint8_t type = 2;         // STT_FUNC
  std::string section;           // empty: SHN_UNDEF
};

struct ElfSpec {
  std::uint16_t type = 2;  // ET_EXEC
  std::uint16_t machine = 40;
  std::uint32_t entry = 0;
  std::vector<SectionSpec> sections;
  std::vector<SymbolSpec> symbols;          // .symtab
  std::vector<SymbolSpec> dynamic_symbols;  // .dynsym
  std::vector<std::string> needed;
  bool section_headers = true;
};

std::vector<std::uint8_t> build_elf(const ElfSpec& spec);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// A32 encodings used by fixtures.
namespace a32 {
std::uint32_t b(std::uint32_t from, std::uint32_t to, std::uint32_t cond = 0xE);
std::uint32_t bl(std::uint32_t from, std::uint32_t to);
inline constexpr std::uint32_t kBxLr = 0xE12FFF1E;
inline constexpr std::uint32_t kBxR3 = 0xE12FFF13;
inline constexpr std::uint32_t kSvc0 = 0xEF000000;
inline constexpr std::uint32_t kNop = 0xE1A00000;  // mov r0, r0
inline constexpr std::uint32_t kPushLr = 0xE92D4010;  // push {r4, lr}
inline constexpr std::uint32_t kPopPc = 0xE8BD8010;   // pop {r4, pc}
std::vector<std::uint8_t> bytes(const std::vector<std::uint32_t>& words);
}  // namespace a32

// A stripped-down program: functions laid out back to back from `base`, each
// a list of words where `call:<index>` placeholders are resolved to BL.
struct FunctionBody {
  std::string name;
  std::vector<std::uint32_t> words;
  std::vector<std::pair<std::size_t, std::size_t>> calls;  // (word index, callee index)
};

// Executable whose entry is the first function; symbols name every function.
ElfSpec program(const std::vector<FunctionBody>& functions, std::uint32_t base = 0x1000);

}  // namespace armgraph::testing
