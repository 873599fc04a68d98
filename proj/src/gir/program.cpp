#include "ops.hpp"

#include <array>
#include <deque>

namespace gvm::gir {

namespace detail {

namespace {
// Indexed by Op. Hypercall arities follow the fixed hypercall table.
constexpr std::array<OpInfo, 43> kOps = {{
    {Op::Add, "add", 2, 2, true, false},
    {Op::Sub, "sub", 2, 2, true, false},
    {Op::Mul, "mul", 2, 2, true, false},
    {Op::UDiv, "udiv", 2, 2, true, false},
    {Op::SDiv, "sdiv", 2, 2, true, false},
    {Op::URem, "urem", 2, 2, true, false},
    {Op::SRem, "srem", 2, 2, true, false},
    {Op::And, "and", 2, 2, true, false},
    {Op::Or, "or", 2, 2, true, false},
    {Op::Xor, "xor", 2, 2, true, false},
    {Op::Shl, "shl", 2, 2, true, false},
    {Op::LShr, "lshr", 2, 2, true, false},
    {Op::AShr, "ashr", 2, 2, true, false},
    {Op::IcmpEq, "icmp.eq", 2, 2, true, false},
    {Op::IcmpNe, "icmp.ne", 2, 2, true, false},
    {Op::IcmpUlt, "icmp.ult", 2, 2, true, false},
    {Op::IcmpUle, "icmp.ule", 2, 2, true, false},
    {Op::IcmpSlt, "icmp.slt", 2, 2, true, false},
    {Op::IcmpSle, "icmp.sle", 2, 2, true, false},
    {Op::ZExt, "zext", 1, 1, true, true},
    {Op::SExt, "sext", 1, 1, true, true},
    {Op::Trunc, "trunc", 1, 1, true, true},
    {Op::Gep, "gep", 2, 2, true, false},
    {Op::PtrToInt, "ptrtoint", 1, 1, true, false},
    {Op::IntToPtr, "inttoptr", 1, 1, true, false},
    {Op::Load, "load", 1, 1, true, true},
    {Op::Store, "store", 2, 2, false, true},
    {Op::Jump, "jump", 1, 1, false, false},
    {Op::Br, "br", 3, 3, false, false},
    {Op::Call, "call", 1, -1, false, false},
    {Op::Ret, "ret", 0, 1, false, false},
    {Op::Unreachable, "unreachable", 0, 0, false, false},
    {Op::Alloca, "alloca", 1, 1, true, false},
    {Op::HcObjMake, "hc.obj_make", 1, 1, false, false},
    {Op::HcObjFree, "hc.obj_free", 1, 1, false, false},
    {Op::HcObjSize, "hc.obj_size", 1, 1, false, false},
    {Op::HcObjResize, "hc.obj_resize", 2, 2, false, false},
    {Op::HcObjShared, "hc.obj_shared", 1, 1, false, false},
    {Op::HcTrace, "hc.trace", 1, 1, false, false},
    {Op::HcInterruptMem, "hc.interrupt_mem", 2, 2, false, false},
    {Op::HcInterruptCfl, "hc.interrupt_cfl", 0, 0, false, false},
    {Op::HcChoose, "hc.choose", 1, 1, false, false},
    {Op::HcControl, "hc.control", 3, 3, false, false},
}};

constexpr bool table_in_order() {
  for (std::size_t i = 0; i < kOps.size(); ++i)
    if (std::size_t(kOps[i].op) != i)
      return false;
  return true;
}
static_assert(table_in_order());
} // namespace

const OpInfo &info(Op op) { return kOps[std::size_t(op)]; }

const OpInfo *lookup(std::string_view mnemonic) {
  for (auto &i : kOps)
    if (i.name == mnemonic)
      return &i;
  return nullptr;
}

} // namespace detail

std::string_view op_name(Op op) { return detail::info(op).name; }

bool is_terminator(Op op) {
  return op == Op::Jump || op == Op::Br || op == Op::Ret || op == Op::Unreachable;
}

bool is_hypercall(Op op) { return op >= Op::HcObjMake; }

bool has_width(Op op) { return detail::info(op).takes_width; }

bool Operand::operator==(const Operand &o) const {
  return kind == o.kind && value == o.value && name == o.name;
}

std::vector<std::uint32_t> Function::block_starts() const {
  std::vector<std::uint32_t> starts;
  starts.reserve(blocks.size());
  std::uint32_t at = 0;
  for (auto &b : blocks) {
    starts.push_back(at);
    at += std::uint32_t(b.code.size());
  }
  return starts;
}

std::size_t Function::size() const {
  std::size_t n = 0;
  for (auto &b : blocks)
    n += b.code.size();
  return n;
}

const Function *Program::find_function(std::string_view name) const {
  for (auto &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

std::optional<std::uint32_t> Program::function_index(std::string_view name) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name)
      return std::uint32_t(i);
  return std::nullopt;
}

std::optional<std::uint32_t> Program::global_index(std::string_view name) const {
  for (std::size_t i = 0; i < globals.size(); ++i)
    if (globals[i].name == name)
      return std::uint32_t(i);
  return std::nullopt;
}

std::string Diagnostic::str() const {
  return std::to_string(line) + ":" + std::to_string(col) + ": " + message;
}

std::set<std::string> reachable_functions(const Program &p, std::string_view root) {
  std::set<std::string> seen;
  std::deque<std::string> work{std::string(root)};
  while (!work.empty()) {
    auto name = std::move(work.front());
    work.pop_front();
    if (!seen.insert(name).second)
      continue;
    auto *f = p.find_function(name);
    if (!f)
      continue;
    for (auto &b : f->blocks)
      for (auto &i : b.code)
        for (auto &a : i.args)
          if (a.kind == Operand::Kind::Func)
            work.push_back(a.name);
  }
  return seen;
}

} // namespace gvm::gir
