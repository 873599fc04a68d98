#pragma once

// GIR: a small register IR standing in for LLVM IR plus hypercalls.
//
//   global <name> <size> [= <hexbytes>]
//   const <name> = <hexbytes>
//   extern <name> [, <name>]*
//   fn <name>(<nparams>) [regs <n>] { [<label>:] <instr>* ... }
//
// Instructions are `[%d =] opcode operand, operand, ...`. Operands are
// registers (%3), immediates (42, -1, 0x2a), global addresses (@g),
// constant addresses ($c), code addresses (&f), labels (for br/jump) and
// ABI constant names (MASK, Flags, OutOfBounds, ...). Calls are written
// `call f(%1, 2)` or `call %5(%1)`. `;` starts a comment.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gvm::gir {

enum class Op : std::uint8_t {
  Add, Sub, Mul, UDiv, SDiv, URem, SRem,
  And, Or, Xor, Shl, LShr, AShr,
  IcmpEq, IcmpNe, IcmpUlt, IcmpUle, IcmpSlt, IcmpSle,
  ZExt, SExt, Trunc,
  Gep, PtrToInt, IntToPtr,
  Load, Store,
  Jump, Br, Call, Ret, Unreachable,
  Alloca,
  HcObjMake, HcObjFree, HcObjSize, HcObjResize, HcObjShared,
  HcTrace, HcInterruptMem, HcInterruptCfl, HcChoose, HcControl,
};

std::string_view op_name(Op op);
bool is_terminator(Op op);
bool is_hypercall(Op op);
bool has_width(Op op);

struct Operand {
  enum class Kind : std::uint8_t { Reg, Imm, Global, Const, Func, Label };
  Kind kind = Kind::Imm;
  // Register index, immediate value, or the resolved index of the named
  // symbol (global slot, constant slot, function index, block index).
  std::int64_t value = 0;
  std::string name;

  static Operand reg(std::int64_t r) { return {Kind::Reg, r, {}}; }
  static Operand imm(std::int64_t v) { return {Kind::Imm, v, {}}; }
  static Operand sym(Kind k, std::string n) { return {k, -1, std::move(n)}; }

  bool operator==(const Operand &o) const;
};

struct Instruction {
  Op op = Op::Unreachable;
  std::uint8_t width = 0; // load/store/zext/sext/trunc only
  std::int32_t dst = -1;  // -1: no result register
  // For calls args[0] is the callee; for br: cond, then-label, else-label.
  std::vector<Operand> args;
  int line = 0, col = 0;

  bool operator==(const Instruction &o) const {
    return op == o.op && width == o.width && dst == o.dst && args == o.args;
  }
};

struct Block {
  std::string label;
  std::vector<Instruction> code;
  bool operator==(const Block &) const = default;
};

struct Function {
  std::string name;
  std::uint32_t nparams = 0;
  std::uint32_t nregs = 0;
  std::vector<Block> blocks;
  int line = 0;

  // Offset of each block's first instruction in the flattened body.
  std::vector<std::uint32_t> block_starts() const;
  std::size_t size() const;

  bool operator==(const Function &o) const {
    return name == o.name && nparams == o.nparams && nregs == o.nregs && blocks == o.blocks;
  }
};

struct GlobalDecl {
  std::string name;
  std::uint32_t size = 0;
  std::optional<std::vector<std::uint8_t>> init;
  bool operator==(const GlobalDecl &) const = default;
};

struct ConstDecl {
  std::string name;
  std::vector<std::uint8_t> bytes;
  bool operator==(const ConstDecl &) const = default;
};

struct Program {
  std::vector<Function> functions;
  std::vector<GlobalDecl> globals;
  std::vector<ConstDecl> constants;
  std::vector<std::string> externs;

  const Function *find_function(std::string_view name) const;
  std::optional<std::uint32_t> function_index(std::string_view name) const;
  std::optional<std::uint32_t> global_index(std::string_view name) const;

  bool operator==(const Program &) const = default;
};

struct Diagnostic {
  int line = 0, col = 0;
  std::string message;
  std::string str() const;
};

template <class T> struct Parsed {
  std::optional<T> value;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return value.has_value() && diagnostics.empty(); }
};

// Parses one translation unit. References to symbols listed in `extern`
// lines are left for link(); anything else must resolve locally.
Parsed<Program> parse_program(std::string_view text);

std::string print(const Program &p);

struct ValidateOptions {
  bool require_complete = false; // no externs left, __boot present
};
std::vector<Diagnostic> validate(const Program &p, ValidateOptions opts = {});

// Fills in Operand::value for symbolic operands. Unknown names produce
// diagnostics unless declared extern.
std::vector<Diagnostic> resolve(Program &p);

Parsed<Program> link(const std::vector<Program> &units);

struct InstrumentationPolicy {
  bool insert_cfl = true;
  bool insert_mem = true;
  std::set<std::string> exempt{"scheduler", "fault_handler"};
};

Program instrument(const Program &p, const InstrumentationPolicy &policy = {});

// Functions reachable from `root` through direct calls and code-address
// operands.
std::set<std::string> reachable_functions(const Program &p, std::string_view root);

} // namespace gvm::gir
