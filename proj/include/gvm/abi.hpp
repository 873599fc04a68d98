#pragma once

// Numeric constants shared between the VM and guest code. The GIR parser
// accepts the symbolic names below as immediates, so OS code never has to
// spell raw numbers. These values are a stable ABI.

#include <cstdint>
#include <optional>
#include <string_view>

namespace gvm {

enum class FaultKind : std::uint8_t {
  None = 0,
  OutOfBounds = 1,
  UseAfterFree = 2,
  DoubleFree = 3,
  InvalidFree = 4,
  BadPointer = 5,
  ReadOnly = 6,
  UndefinedControl = 7,
  DivisionByZero = 8,
  BadJumpTarget = 9,
  CallArityMismatch = 10,
  HypercallMisuse = 11,
  DoubleFault = 12,
};

inline constexpr int kFaultKindCount = 12;

std::string_view fault_name(FaultKind k);
std::optional<FaultKind> fault_from_name(std::string_view name);

enum class ControlReg : std::uint8_t {
  FramePtr = 0,
  GlobalsPtr = 1,
  ConstantsPtr = 2,
  SchedStatePtr = 3,
  FaultHandlerPtr = 4,
  Flags = 5,
  PC = 6,
};

enum class ControlAction : std::uint8_t {
  Get = 0,
  Set = 1,
  SetBits = 2,   // Flags |= value
  ClearBits = 3, // Flags &= ~value
};

namespace flag {
inline constexpr std::uint64_t Error = 1;
inline constexpr std::uint64_t Accept = 2;
inline constexpr std::uint64_t Mask = 4;
inline constexpr std::uint64_t Interrupted = 8;
} // namespace flag

// Second operand of hc.interrupt_mem: bit 0 set for stores, the access
// width in bytes shifted left by one.
inline constexpr std::int64_t mem_kind(bool store, unsigned width) {
  return std::int64_t(width) << 1 | (store ? 1 : 0);
}

// Word 0 of the scheduler-state object receives the interrupted frame
// pointer whenever an interrupt fires.
inline constexpr std::uint32_t kSchedIntFrameOffset = 0;

// Activation frame layout: parent, saved pc, registers, alloca list.
inline constexpr std::uint32_t kFrameParent = 0;
inline constexpr std::uint32_t kFramePC = 8;
inline constexpr std::uint32_t kFrameRegs = 16;
inline constexpr std::uint32_t frame_size(std::uint32_t regs) { return 24 + 8 * regs; }
inline constexpr std::uint32_t frame_alloca_slot(std::uint32_t regs) { return 16 + 8 * regs; }

std::optional<std::int64_t> abi_constant(std::string_view name);

} // namespace gvm
