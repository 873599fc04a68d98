#pragma once

#include "gvm/gir.hpp"
#include "gvm/heap.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gvm {

// A register or operand value. Undefined values still carry concrete
// "as-if" bits; they start out as zero.
struct Value {
  std::uint64_t bits = 0;
  bool defined = false;
  bool pointer = false;
};

struct InterruptRecord {
  Pointer pc; // code pointer of the interrupt_* hypercall
  bool fired = false;
  bool operator==(const InterruptRecord &) const = default;
};

struct FaultRecord {
  FaultKind kind = FaultKind::None;
  Pointer pc;         // faulting instruction
  Pointer cont_pc;    // where execution would continue
  Pointer cont_frame;
  Value operand;      // offending operand, when there is one
};

// Supplies the results of nondeterministic choices and, optionally,
// overrides interrupt decisions. Returning nullopt aborts the transition
// as diverged (used by replay).
class TransitionOracle {
public:
  virtual ~TransitionOracle() = default;
  virtual std::optional<std::uint64_t> choose(std::uint64_t bound) = 0;
  virtual std::optional<bool> interrupt(Pointer pc, bool natural) {
    (void)pc;
    return natural;
  }
};

// Answers every choice with 0.
class FirstChoice final : public TransitionOracle {
public:
  std::optional<std::uint64_t> choose(std::uint64_t) override { return 0; }
};

struct VmOptions {
  bool tau_cfl = true;  // false: every interrupt_cfl fires
  bool tau_mem = true;  // false: every interrupt_mem fires
  std::uint64_t step_budget = 1'000'000;
};

enum class TransitionStatus { Ok, Terminal, BudgetExceeded, Diverged };

struct TransitionResult {
  TransitionStatus status = TransitionStatus::Ok;
  Snapshot successor;
  std::vector<std::uint64_t> choices;
  std::vector<std::uint64_t> bounds;
  std::vector<InterruptRecord> interrupts;
  std::vector<std::string> traces;
  std::vector<FaultRecord> faults;
  std::uint8_t flags = 0; // flag::Error | flag::Accept
  std::uint64_t instructions = 0;
  std::uint64_t user_instructions = 0;
  std::string diagnostic;

  bool error() const { return flags & flag::Error; }
  bool accept() const { return flags & flag::Accept; }
};

// A loaded program: the evaluator for one linked, instrumented GIR image.
// Machine is immutable after construction; boot() and run() may be called
// concurrently from different host threads.
class Machine {
public:
  explicit Machine(gir::Program linked);

  // Runs __boot on a fresh heap; the successor is the initial state.
  TransitionResult boot(TransitionOracle &oracle, const VmOptions &opts = {}) const;
  // Runs the scheduler in state `s` until the transition ends.
  TransitionResult run(const Snapshot &s, TransitionOracle &oracle,
                       const VmOptions &opts = {}) const;

  const gir::Program &program() const { return program_; }
  std::string describe_pc(Pointer pc) const;
  std::optional<Pointer> parse_pc(std::string_view text) const;

  struct FunctionImage {
    std::string name;
    std::uint32_t nparams = 0, nregs = 0;
    std::vector<gir::Instruction> code; // labels rewritten to flat indices
  };
  const std::vector<FunctionImage> &functions() const { return functions_; }

  // "<Kind> at f:3, continues at f:4, operand 0x7 (undefined)"
  std::string describe_fault(const FaultRecord &f) const;

private:
  friend class Evaluator;
  gir::Program program_;
  std::vector<FunctionImage> functions_;
  std::uint32_t boot_fn_ = 0, scheduler_fn_ = 0;
  std::optional<std::uint32_t> main_fn_;
};

} // namespace gvm
