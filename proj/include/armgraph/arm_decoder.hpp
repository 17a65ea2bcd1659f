#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace armgraph::cfg {

using Address = std::uint64_t;

enum class InstructionKind {
  kFallthrough,
  kBranch,
  kCondBranch,
  kCall,
  kIndirectJump,
  kIndirectCall,
  kReturn,
  kSyscall,
};

std::string_view to_string(InstructionKind k);

// A decoded A32 instruction. Only control flow is modelled; everything else is
// kFallthrough.
struct Instruction {
  Address addr = 0;
  std::uint32_t word = 0;
  InstructionKind kind = InstructionKind::kFallthrough;
  // Set for kBranch, kCondBranch and kCall.
  std::optional<Address> target;
  // False when the condition field is neither AL nor the unconditional space.
  bool always = true;

  bool transfers_control() const {
    return kind != InstructionKind::kFallthrough &&
           kind != InstructionKind::kSyscall;
  }
};

// Total over all 32-bit words.
Instruction decode_instruction(std::uint32_t word, Address addr);

// `push {..., lr}` / `stmdb sp!, {..., lr}` / `str lr, [sp, #-4]!`.
bool is_link_register_push(std::uint32_t word);

}  // namespace armgraph::cfg
