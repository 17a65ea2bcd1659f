#include "armgraph/arm_decoder.hpp"

namespace armgraph::cfg {
namespace {

constexpr std::uint32_t kCondAlways = 0xE;
constexpr std::uint32_t kCondUnconditional = 0xF;
constexpr std::uint32_t kPc = 15;
constexpr std::uint32_t kLr = 14;
constexpr std::uint32_t kSp = 13;

constexpr std::uint32_t bits(std::uint32_t w, int hi, int lo) {
  return (w >> lo) & ((1u << (hi - lo + 1)) - 1u);
}

// A32 branch target: PC reads as the instruction address + 8.
Address branch_target(std::uint32_t word, Address addr) {
  const std::int32_t imm24 = static_cast<std::int32_t>(word << 8) >> 8;
  const std::uint32_t t = static_cast<std::uint32_t>(addr) + 8u +
                          static_cast<std::uint32_t>(imm24) * 4u;
  return t;
}

Instruction make(std::uint32_t word, Address addr, InstructionKind kind,
                 std::optional<Address> target = std::nullopt) {
  Instruction ins;
  ins.addr = addr;
  ins.word = word;
  ins.kind = kind;
  ins.target = target;
  const std::uint32_t cond = bits(word, 31, 28);
  ins.always = cond == kCondAlways || cond == kCondUnconditional;
  return ins;
}

// Data-processing instruction (register or immediate form) whose destination
// is the PC. Excludes the multiply/extra-load space and the miscellaneous
// space that shares opcodes 10xx with S=0.
bool data_processing_writes_pc(std::uint32_t w) {
  if (bits(w, 27, 26) != 0) return false;
  const bool immediate = bits(w, 25, 25) != 0;
  if (!immediate && bits(w, 7, 7) && bits(w, 4, 4)) return false;
  const std::uint32_t opcode = bits(w, 24, 21);
  if ((opcode & 0xC) == 0x8) {
    // TST/TEQ/CMP/CMN write no register; with S clear this is MRS/MSR/BX,
    // MOVW/MOVT and friends.
    return false;
  }
  return bits(w, 15, 12) == kPc;
}

bool is_mov_from_lr(std::uint32_t w) {
  // MOV{S} pc, lr with no shift.
  return bits(w, 25, 25) == 0 && bits(w, 24, 21) == 0xD &&
         bits(w, 11, 4) == 0 && bits(w, 3, 0) == kLr;
}

}  // namespace

std::string_view to_string(InstructionKind k) {
  switch (k) {
    case InstructionKind::kFallthrough: return "fallthrough";
    case InstructionKind::kBranch: return "branch";
    case InstructionKind::kCondBranch: return "cond_branch";
    case InstructionKind::kCall: return "call";
    case InstructionKind::kIndirectJump: return "indirect_jump";
    case InstructionKind::kIndirectCall: return "indirect_call";
    case InstructionKind::kReturn: return "return";
    case InstructionKind::kSyscall: return "syscall";
  }
  return "unknown";
}

Instruction decode_instruction(std::uint32_t w, Address addr) {
  const std::uint32_t cond = bits(w, 31, 28);

  if (cond == kCondUnconditional) {
    // BLX <imm>: switches to Thumb, H supplies bit 1 of the target.
    if (bits(w, 27, 25) == 0x5) {
      const Address t = branch_target(w, addr) + (bits(w, 24, 24) << 1);
      return make(w, addr, InstructionKind::kCall, t & 0xFFFFFFFFu);
    }
    return make(w, addr, InstructionKind::kFallthrough);
  }

  if (bits(w, 27, 25) == 0x5) {
    const Address t = branch_target(w, addr) & 0xFFFFFFFFu;
    if (bits(w, 24, 24)) return make(w, addr, InstructionKind::kCall, t);
    return make(w, addr,
                cond == kCondAlways ? InstructionKind::kBranch
                                    : InstructionKind::kCondBranch,
                t);
  }

  if ((w & 0x0FFFFFF0u) == 0x012FFF10u) {  // BX Rm
    return make(w, addr, bits(w, 3, 0) == kLr ? InstructionKind::kReturn
                                              : InstructionKind::kIndirectJump);
  }
  if ((w & 0x0FFFFFF0u) == 0x012FFF30u) {  // BLX Rm
    return make(w, addr, InstructionKind::kIndirectCall);
  }

  if (bits(w, 27, 24) == 0xF) return make(w, addr, InstructionKind::kSyscall);

  if (data_processing_writes_pc(w)) {
    return make(w, addr, is_mov_from_lr(w) ? InstructionKind::kReturn
                                           : InstructionKind::kIndirectJump);
  }

  // LDR pc, [...]. Register-offset forms with bit 4 set are media encodings.
  if (bits(w, 27, 26) == 0x1 && bits(w, 20, 20) && bits(w, 22, 22) == 0 &&
      bits(w, 15, 12) == kPc && !(bits(w, 25, 25) && bits(w, 4, 4))) {
    // LDR pc, [sp], #4 is POP {pc}.
    const bool pop = (w & 0x0FFFFFFFu) == 0x049DF004u;
    return make(w, addr, pop ? InstructionKind::kReturn
                             : InstructionKind::kIndirectJump);
  }

  // LDM with pc in the register list.
  if (bits(w, 27, 25) == 0x4 && bits(w, 20, 20) && bits(w, 15, 15)) {
    // POP: LDMIA sp! (P=0, U=1, W=1).
    const bool pop = bits(w, 19, 16) == kSp && bits(w, 24, 23) == 0x1 &&
                     bits(w, 21, 21);
    return make(w, addr, pop ? InstructionKind::kReturn
                             : InstructionKind::kIndirectJump);
  }

  return make(w, addr, InstructionKind::kFallthrough);
}

bool is_link_register_push(std::uint32_t w) {
  if (bits(w, 31, 28) != kCondAlways) return false;
  // STMDB sp!, {..., lr}
  if ((w & 0x0FFF0000u) == 0x092D0000u && bits(w, 14, 14)) return true;
  // STR lr, [sp, #-4]!
  return (w & 0x0FFFFFFFu) == 0x052DE004u;
}

}  // namespace armgraph::cfg
