#include "ops.hpp"

#include <sstream>

namespace gvm::gir {

namespace {

void hex(std::ostream &os, const std::vector<std::uint8_t> &bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  for (auto b : bytes)
    os << digits[b >> 4] << digits[b & 15];
}

void operand(std::ostream &os, const Operand &a) {
  switch (a.kind) {
  case Operand::Kind::Reg: os << '%' << a.value; break;
  case Operand::Kind::Imm: os << a.value; break;
  case Operand::Kind::Global: os << '@' << a.name; break;
  case Operand::Kind::Const: os << '$' << a.name; break;
  case Operand::Kind::Func: os << '&' << a.name; break;
  case Operand::Kind::Label: os << a.name; break;
  }
}

} // namespace

std::string print(const Program &p) {
  std::ostringstream os;
  if (!p.externs.empty()) {
    os << "extern ";
    for (std::size_t i = 0; i < p.externs.size(); ++i)
      os << (i ? ", " : "") << p.externs[i];
    os << '\n';
  }
  for (auto &g : p.globals) {
    os << "global " << g.name << ' ' << g.size;
    if (g.init && !g.init->empty()) {
      os << " = ";
      hex(os, *g.init);
    }
    os << '\n';
  }
  for (auto &c : p.constants) {
    os << "const " << c.name << " = ";
    if (c.bytes.empty())
      os << "\"\"";
    hex(os, c.bytes);
    os << '\n';
  }
  for (auto &f : p.functions) {
    os << "\nfn " << f.name << '(' << f.nparams << ") regs " << f.nregs << " {\n";
    for (auto &b : f.blocks) {
      os << b.label << ":\n";
      for (auto &ins : b.code) {
        os << "  ";
        if (ins.dst >= 0)
          os << '%' << ins.dst << " = ";
        os << op_name(ins.op);
        if (ins.width)
          os << '.' << unsigned(ins.width);
        if (ins.op == Op::Call) {
          os << ' ';
          operand(os, ins.args[0]);
          os << '(';
          for (std::size_t i = 1; i < ins.args.size(); ++i) {
            if (i > 1)
              os << ", ";
            operand(os, ins.args[i]);
          }
          os << ')';
        } else {
          for (std::size_t i = 0; i < ins.args.size(); ++i) {
            os << (i ? ", " : " ");
            operand(os, ins.args[i]);
          }
        }
        os << '\n';
      }
    }
    os << "}\n";
  }
  return os.str();
}

} // namespace gvm::gir
