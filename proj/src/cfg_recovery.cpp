#include "armgraph/cfg_recovery.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

namespace armgraph::cfg {
namespace {

constexpr Address kLibraryAlignment = 0x10000;
constexpr Address kStubFloor = Address{1} << 32;

Address align_up(Address v, Address alignment) {
  return (v + alignment - 1) / alignment * alignment;
}

std::string hex(Address a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

int source_rank(FunctionSource s) {
  switch (s) {
    case FunctionSource::kSymbol: return 0;
    case FunctionSource::kEntryPoint: return 1;
    case FunctionSource::kCallTarget: return 2;
    case FunctionSource::kPrologueHeuristic: return 3;
  }
  return 4;
}

void add_function(std::map<Address, FunctionInfo>& out, FunctionInfo f) {
  auto [it, inserted] = out.emplace(f.entry, f);
  if (!inserted && source_rank(f.source) < source_rank(it->second.source)) {
    if (!f.name) f.name = it->second.name;
    it->second = std::move(f);
  } else if (!inserted && !it->second.name && f.name) {
    it->second.name = f.name;
  }
}

// One executable section placed in the shared address space.
struct CodeRegion {
  Address start = 0;
  const elf::Section* section = nullptr;
  FunctionOrigin origin = FunctionOrigin::kImage;

  Address end() const { return start + section->size; }
};

// The image and its libraries mapped into one address space, with import and
// export tables for cross-image calls.
class AddressSpace {
 public:
  AddressSpace(const elf::BinaryImage& image,
               const std::vector<elf::BinaryImage>& libraries) {
    Address top = map(image, 0, FunctionOrigin::kImage);
    for (const auto& lib : libraries) {
      const Address base = align_up(top, kLibraryAlignment);
      top = map(lib, base, FunctionOrigin::kLibrary);
    }
    next_stub_ = std::max(kStubFloor, align_up(top, kLibraryAlignment));
    std::sort(regions_.begin(), regions_.end(),
              [](const CodeRegion& a, const CodeRegion& b) { return a.start < b.start; });
  }

  const CodeRegion* region_at(Address a) const {
    auto it = std::upper_bound(regions_.begin(), regions_.end(), a,
                               [](Address v, const CodeRegion& r) { return v < r.start; });
    if (it == regions_.begin()) return nullptr;
    --it;
    return a < it->end() ? &*it : nullptr;
  }

  std::optional<std::uint32_t> fetch(Address a) const {
    if (a % 4 != 0) return std::nullopt;
    const CodeRegion* r = region_at(a);
    if (r == nullptr || a + 4 > r->end()) return std::nullopt;
    const auto& b = r->section->bytes;
    const std::size_t off = a - r->start;
    return static_cast<std::uint32_t>(b[off]) |
           (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
  }

  const std::optional<std::string>& name_of(Address a) const {
    static const std::optional<std::string> kNone;
    auto it = names_.find(a);
    return it == names_.end() ? kNone : it->second;
  }

  // Redirects a call through an import slot to the defining library, or to a
  // per-name stub. Other targets are returned unchanged.
  Address resolve_call(Address target, bool& is_stub) {
    is_stub = false;
    auto imp = imports_.find(target);
    if (imp == imports_.end()) return target;
    auto exp = exports_.find(imp->second);
    if (exp != exports_.end()) return exp->second;
    is_stub = true;
    auto [it, inserted] = stubs_.emplace(imp->second, next_stub_);
    if (inserted) {
      names_[next_stub_] = imp->second;
      next_stub_ += 4;
    }
    return it->second;
  }

  const std::map<std::string, Address>& stubs() const { return stubs_; }

 private:
  Address map(const elf::BinaryImage& img, Address base, FunctionOrigin origin) {
    Address top = base;
    for (const auto& s : img.sections) {
      top = std::max<Address>(top, base + s.vaddr + s.size);
      if (s.executable() && s.has_bytes() && s.size > 0) {
        regions_.push_back({base + s.vaddr, &s, origin});
      }
    }
    for (const auto& sym : img.symbols) {
      if (sym.kind != elf::SymbolKind::kFunction) continue;
      if (sym.defined) {
        names_.emplace(base + sym.vaddr, sym.name);
        if (origin == FunctionOrigin::kLibrary) exports_.emplace(sym.name, base + sym.vaddr);
      } else if (sym.vaddr != 0) {
        imports_.emplace(base + sym.vaddr, sym.name);
      }
    }
    return top;
  }

  std::vector<CodeRegion> regions_;
  std::unordered_map<Address, std::string> imports_;
  std::map<std::string, Address> exports_;
  std::map<Address, std::optional<std::string>> names_;
  std::map<std::string, Address> stubs_;
  Address next_stub_ = kStubFloor;
};

bool intra_procedural(JumpKind k) {
  return k != JumpKind::kCall;
}

}  // namespace

std::string_view to_string(JumpKind k) {
  switch (k) {
    case JumpKind::kFallthrough: return "fallthrough";
    case JumpKind::kJump: return "jump";
    case JumpKind::kCondJump: return "cond_jump";
    case JumpKind::kCall: return "call";
    case JumpKind::kCallReturn: return "call_return";
  }
  return "unknown";
}

std::optional<JumpKind> jump_kind_from_string(std::string_view s) {
  for (JumpKind k : {JumpKind::kFallthrough, JumpKind::kJump, JumpKind::kCondJump,
                     JumpKind::kCall, JumpKind::kCallReturn}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(FunctionSource s) {
  switch (s) {
    case FunctionSource::kSymbol: return "symbol";
    case FunctionSource::kEntryPoint: return "entry_point";
    case FunctionSource::kCallTarget: return "call_target";
    case FunctionSource::kPrologueHeuristic: return "prologue_heuristic";
  }
  return "unknown";
}

std::string_view to_string(FunctionOrigin o) {
  switch (o) {
    case FunctionOrigin::kImage: return "image";
    case FunctionOrigin::kLibrary: return "library";
    case FunctionOrigin::kImportStub: return "import_stub";
  }
  return "unknown";
}

const BasicBlock* ControlFlowGraph::block_at(Address start) const {
  auto it = nodes.find(start);
  return it == nodes.end() ? nullptr : &it->second;
}

const FunctionInfo* RecoveryResult::function_at(Address entry) const {
  auto it = std::lower_bound(
      functions.begin(), functions.end(), entry,
      [](const FunctionInfo& f, Address a) { return f.entry < a; });
  return (it != functions.end() && it->entry == entry) ? &*it : nullptr;
}

std::vector<FunctionInfo> identify_functions(const elf::BinaryImage& image,
                                             const std::set<Address>& call_targets,
                                             const RecoveryOptions& options) {
  std::map<Address, FunctionInfo> found;
  if (options.use_symbols) {
    for (const auto& sym : image.symbols) {
      if (sym.kind == elf::SymbolKind::kFunction && sym.defined && sym.vaddr != 0) {
        add_function(found, {sym.vaddr, sym.name, FunctionSource::kSymbol});
      }
    }
  }
  if (image.type == elf::FileType::kExecutable || image.entry_point != 0) {
    add_function(found, {image.entry_point, std::nullopt, FunctionSource::kEntryPoint});
  }
  for (Address t : call_targets) {
    add_function(found, {t, std::nullopt, FunctionSource::kCallTarget});
  }
  if (options.use_prologue_heuristic) {
    for (const auto& s : image.sections) {
      if (!s.executable() || !s.has_bytes()) continue;
      const Address first = align_up(s.vaddr, 4);
      for (Address a = first; a + 4 <= s.vaddr + s.size; a += 4) {
        const std::size_t off = a - s.vaddr;
        const std::uint32_t w = static_cast<std::uint32_t>(s.bytes[off]) |
                                (static_cast<std::uint32_t>(s.bytes[off + 1]) << 8) |
                                (static_cast<std::uint32_t>(s.bytes[off + 2]) << 16) |
                                (static_cast<std::uint32_t>(s.bytes[off + 3]) << 24);
        if (is_link_register_push(w)) {
          add_function(found, {a, std::nullopt, FunctionSource::kPrologueHeuristic});
        }
      }
    }
  }
  std::vector<FunctionInfo> out;
  out.reserve(found.size());
  for (auto& [addr, f] : found) out.push_back(std::move(f));
  return out;
}

RecoveryResult recover_cfg(const elf::BinaryImage& image,
                           const std::vector<elf::BinaryImage>& libraries,
                           const RecoveryOptions& options) {
  const bool has_code = std::any_of(
      image.sections.begin(), image.sections.end(),
      [](const elf::Section& s) { return s.executable() && s.has_bytes() && s.size > 0; });
  if (!has_code) {
    throw CfgError(CfgErrc::kNoExecutableSection,
                   "no executable section with contents in " + image.path);
  }

  AddressSpace space(image, libraries);
  RecoveryResult result;
  auto diag = [&result](std::string msg) { result.diagnostics.push_back(std::move(msg)); };

  std::map<Address, FunctionInfo> functions;
  for (auto& f : identify_functions(image, {}, options)) functions.emplace(f.entry, f);

  // Discovery: linear sweeps from every leader until a control transfer.
  std::map<Address, Instruction> decoded;
  std::set<Address> leaders;
  std::set<Address> worklist;
  std::map<Address, Address> call_sites;  // call instruction -> resolved callee
  std::set<Address> stub_targets;

  auto enqueue = [&](Address a) {
    leaders.insert(a);
    if (!decoded.contains(a)) worklist.insert(a);
  };
  auto enqueue_target = [&](Address from, Address target) {
    if (!space.fetch(target)) {
      diag("dropped target " + hex(target) + " of " + hex(from) +
           ": outside executable code");
      return false;
    }
    enqueue(target);
    return true;
  };

  for (const auto& [entry, f] : functions) enqueue(entry);

  while (!worklist.empty()) {
    const Address start = *worklist.begin();
    worklist.erase(worklist.begin());
    for (Address cur = start; !decoded.contains(cur); cur += 4) {
      const auto word = space.fetch(cur);
      if (!word) {
        diag("decoding stopped at " + hex(cur) + ": outside executable code");
        break;
      }
      const Instruction ins = decode_instruction(*word, cur);
      decoded.emplace(cur, ins);
      if (!ins.transfers_control()) continue;

      const Address next = cur + 4;
      switch (ins.kind) {
        case InstructionKind::kBranch:
          enqueue_target(cur, *ins.target);
          break;
        case InstructionKind::kCondBranch:
          enqueue_target(cur, *ins.target);
          enqueue(next);
          break;
        case InstructionKind::kCall: {
          bool is_stub = false;
          const Address callee = space.resolve_call(*ins.target, is_stub);
          if (is_stub) {
            stub_targets.insert(callee);
            call_sites[cur] = callee;
          } else if (enqueue_target(cur, callee)) {
            call_sites[cur] = callee;
            const CodeRegion* r = space.region_at(callee);
            add_function(functions, {callee, space.name_of(callee),
                                     FunctionSource::kCallTarget, r->origin});
          }
          enqueue(next);
          break;
        }
        case InstructionKind::kIndirectCall:
          enqueue(next);
          break;
        case InstructionKind::kIndirectJump:
        case InstructionKind::kReturn:
          if (!ins.always) enqueue(next);
          break;
        default:
          break;
      }
      break;
    }
  }

  // Block formation: a block runs from a leader to its first control transfer
  // or to the instruction before the next leader.
  ControlFlowGraph& cfg = result.cfg;
  for (Address leader : leaders) {
    if (!decoded.contains(leader)) continue;
    BasicBlock block;
    block.start = leader;
    Address cur = leader;
    const Instruction* last = nullptr;
    bool falls_into_next = false;
    for (;;) {
      const Instruction& ins = decoded.at(cur);
      last = &ins;
      ++block.instruction_count;
      for (int i = 0; i < 4; ++i) {
        block.byte_string.push_back(static_cast<std::uint8_t>(ins.word >> (8 * i)));
      }
      if (ins.kind == InstructionKind::kSyscall) block.is_syscall = true;
      if (ins.transfers_control()) break;
      const Address next = cur + 4;
      if (!decoded.contains(next)) break;
      if (leaders.contains(next)) {
        falls_into_next = true;
        break;
      }
      cur = next;
    }
    block.terminator = last->transfers_control() ? last->kind : InstructionKind::kFallthrough;

    const Address next = last->addr + 4;
    const bool next_is_block = decoded.contains(next) && leaders.contains(next);
    auto is_block = [&](Address a) { return decoded.contains(a) && leaders.contains(a); };
    switch (block.terminator) {
      case InstructionKind::kBranch:
        if (is_block(*last->target)) cfg.edges.insert({leader, *last->target, JumpKind::kJump});
        break;
      case InstructionKind::kCondBranch:
        if (is_block(*last->target)) cfg.edges.insert({leader, *last->target, JumpKind::kCondJump});
        if (next_is_block) cfg.edges.insert({leader, next, JumpKind::kFallthrough});
        break;
      case InstructionKind::kCall:
        if (auto it = call_sites.find(last->addr); it != call_sites.end()) {
          cfg.edges.insert({leader, it->second, JumpKind::kCall});
        }
        if (next_is_block) cfg.edges.insert({leader, next, JumpKind::kCallReturn});
        break;
      case InstructionKind::kIndirectCall:
        if (next_is_block) cfg.edges.insert({leader, next, JumpKind::kCallReturn});
        break;
      case InstructionKind::kIndirectJump:
      case InstructionKind::kReturn:
        if (!last->always && next_is_block) {
          cfg.edges.insert({leader, next, JumpKind::kFallthrough});
        }
        break;
      default:
        if (falls_into_next) cfg.edges.insert({leader, next, JumpKind::kFallthrough});
        break;
    }
    result.block_origin[leader] = space.region_at(leader)->origin;
    cfg.nodes.emplace(leader, std::move(block));
  }

  for (const auto& [name, addr] : space.stubs()) {
    if (!stub_targets.contains(addr)) continue;
    BasicBlock stub;
    stub.start = addr;
    stub.terminator = InstructionKind::kReturn;
    cfg.nodes.emplace(addr, std::move(stub));
    result.block_origin[addr] = FunctionOrigin::kImportStub;
    functions[addr] = {addr, name, FunctionSource::kCallTarget, FunctionOrigin::kImportStub};
  }

  for (auto it = functions.begin(); it != functions.end();) {
    if (!cfg.nodes.contains(it->first)) {
      diag("function " + hex(it->first) + " has no decodable code");
      it = functions.erase(it);
    } else {
      ++it;
    }
  }

  // Ownership: blocks reachable without calls from a function entry belong to
  // the lowest such entry; traversal stops at other functions' entries.
  std::map<Address, std::vector<Address>> successors;
  for (const auto& e : cfg.edges) {
    if (intra_procedural(e.kind)) successors[e.src].push_back(e.dst);
  }
  std::map<Address, Address> owner;
  for (const auto& [entry, f] : functions) {
    if (owner.contains(entry)) continue;
    std::deque<Address> queue{entry};
    owner[entry] = entry;
    while (!queue.empty()) {
      const Address b = queue.front();
      queue.pop_front();
      for (Address s : successors[b]) {
        if (owner.contains(s) || functions.contains(s)) continue;
        owner[s] = entry;
        queue.push_back(s);
      }
    }
  }

  CallGraph& cg = result.call_graph;
  for (const auto& [entry, f] : functions) cg.nodes.insert(entry);
  for (const auto& e : cfg.edges) {
    if (e.kind != JumpKind::kCall) continue;
    auto it = owner.find(e.src);
    if (it == owner.end()) {
      diag("call from " + hex(e.src) + " is outside every function");
      continue;
    }
    cg.edges.insert({it->second, e.dst});
  }

  result.functions.reserve(functions.size());
  for (auto& [entry, f] : functions) result.functions.push_back(std::move(f));
  return result;
}

std::string write_edge_list(const ControlFlowGraph& cfg) {
  std::ostringstream os;
  os << std::hex;
  for (const auto& e : cfg.edges) {
    os << "0x" << e.src << " 0x" << e.dst << ' ' << to_string(e.kind) << '\n';
  }
  return os.str();
}

std::string write_edge_list(const CallGraph& cg) {
  std::ostringstream os;
  os << std::hex;
  for (const auto& [caller, callee] : cg.edges) {
    os << "0x" << caller << " 0x" << callee << " call\n";
  }
  return os.str();
}

}  // namespace armgraph::cfg
