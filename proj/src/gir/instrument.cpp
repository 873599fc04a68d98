#include "gvm/abi.hpp"
#include "gvm/gir.hpp"

#include <vector>

namespace gvm::gir {

namespace {

// Registers whose every definition is an alloca: their values can only be
// frame-local objects, which no other thread can see.
std::vector<bool> alloca_only_registers(const Function &f) {
  std::vector<int> defs(f.nregs, 0), alloca_defs(f.nregs, 0);
  for (auto &b : f.blocks)
    for (auto &ins : b.code)
      if (ins.dst >= 0 && std::uint32_t(ins.dst) < f.nregs) {
        ++defs[ins.dst];
        alloca_defs[ins.dst] += ins.op == Op::Alloca;
      }
  std::vector<bool> out(f.nregs, false);
  for (std::uint32_t r = f.nparams; r < f.nregs; ++r)
    out[r] = defs[r] > 0 && defs[r] == alloca_defs[r];
  return out;
}

std::vector<bool> back_edge_targets(const Function &f) {
  std::vector<bool> out(f.blocks.size(), false);
  for (std::size_t s = 0; s < f.blocks.size(); ++s)
    for (auto &ins : f.blocks[s].code)
      for (auto &a : ins.args)
        if (a.kind == Operand::Kind::Label && a.value >= 0 && std::size_t(a.value) <= s)
          out[a.value] = true;
  return out;
}

Instruction make(Op op, std::vector<Operand> args, const Instruction &near) {
  Instruction i;
  i.op = op;
  i.args = std::move(args);
  i.line = near.line;
  i.col = near.col;
  return i;
}

} // namespace

Program instrument(const Program &p, const InstrumentationPolicy &policy) {
  Program out = p;
  for (auto &f : out.functions) {
    if (policy.exempt.count(f.name))
      continue;
    auto loops = back_edge_targets(f);
    auto private_regs = alloca_only_registers(f);

    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
      auto &block = f.blocks[bi];
      std::vector<Instruction> code;
      code.reserve(block.code.size() + 2);

      if (policy.insert_cfl && loops[bi] && !block.code.empty() &&
          block.code.front().op != Op::HcInterruptCfl)
        code.push_back(make(Op::HcInterruptCfl, {}, block.code.front()));

      for (auto &ins : block.code) {
        bool access = ins.op == Op::Load || ins.op == Op::Store;
        if (policy.insert_mem && access) {
          auto &addr = ins.args[0];
          bool is_private = addr.kind == Operand::Kind::Reg && addr.value >= 0 &&
                            std::size_t(addr.value) < private_regs.size() &&
                            private_regs[addr.value];
          auto kind = Operand::imm(mem_kind(ins.op == Op::Store, ins.width));
          bool guarded = !code.empty() && code.back().op == Op::HcInterruptMem &&
                         code.back().args[0] == addr && code.back().args[1] == kind;
          if (!is_private && !guarded)
            code.push_back(make(Op::HcInterruptMem, {addr, kind}, ins));
        }
        code.push_back(ins);
      }
      block.code = std::move(code);
    }
  }
  return out;
}

} // namespace gvm::gir
