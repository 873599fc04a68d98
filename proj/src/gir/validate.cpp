#include "ops.hpp"

#include <algorithm>
#include <map>

namespace gvm::gir {

namespace {

using Kind = Operand::Kind;

struct SymbolTable {
  std::map<std::string, std::uint32_t, std::less<>> functions, globals, constants;
  std::set<std::string, std::less<>> externs;

  explicit SymbolTable(const Program &p) {
    for (std::size_t i = 0; i < p.functions.size(); ++i)
      functions.emplace(p.functions[i].name, std::uint32_t(i));
    for (std::size_t i = 0; i < p.globals.size(); ++i)
      globals.emplace(p.globals[i].name, std::uint32_t(i));
    for (std::size_t i = 0; i < p.constants.size(); ++i)
      constants.emplace(p.constants[i].name, std::uint32_t(i));
    externs.insert(p.externs.begin(), p.externs.end());
  }
};

} // namespace

std::vector<Diagnostic> resolve(Program &p) {
  std::vector<Diagnostic> diags;
  SymbolTable syms(p);
  for (auto &f : p.functions) {
    std::map<std::string, std::int64_t, std::less<>> labels;
    for (std::size_t b = 0; b < f.blocks.size(); ++b)
      if (!labels.emplace(f.blocks[b].label, std::int64_t(b)).second)
        diags.push_back({f.line, 1, "duplicate label '" + f.blocks[b].label +
                                        "' in function '" + f.name + "'"});
    for (auto &b : f.blocks)
      for (auto &ins : b.code)
        for (auto &a : ins.args) {
          auto unresolved = [&](const char *what) {
            a.value = -1;
            if (!syms.externs.count(a.name))
              diags.push_back({ins.line, ins.col, std::string("unresolved ") + what +
                                                      " '" + a.name + "'"});
          };
          switch (a.kind) {
          case Kind::Label:
            if (auto it = labels.find(a.name); it != labels.end())
              a.value = it->second;
            else {
              a.value = -1;
              diags.push_back({ins.line, ins.col, "unknown label '" + a.name + "'"});
            }
            break;
          case Kind::Func:
            if (auto it = syms.functions.find(a.name); it != syms.functions.end())
              a.value = it->second;
            else
              unresolved("function");
            break;
          case Kind::Global:
            if (auto it = syms.globals.find(a.name); it != syms.globals.end())
              a.value = it->second;
            else
              unresolved("global");
            break;
          case Kind::Const:
            if (auto it = syms.constants.find(a.name); it != syms.constants.end())
              a.value = it->second;
            else
              unresolved("constant");
            break;
          default:
            break;
          }
        }
  }
  return diags;
}

std::vector<Diagnostic> validate(const Program &p, ValidateOptions opts) {
  std::vector<Diagnostic> diags;
  auto report = [&](int line, int col, std::string msg) {
    diags.push_back({line, col, std::move(msg)});
  };

  std::map<std::string, int, std::less<>> names;
  auto claim = [&](const std::string &n, int line) {
    if (!names.emplace(n, line).second)
      report(line, 1, "duplicate symbol '" + n + "'");
  };
  for (auto &f : p.functions)
    claim(f.name, f.line);
  for (auto &g : p.globals)
    claim(g.name, 0);
  for (auto &c : p.constants)
    claim(c.name, 0);

  if (opts.require_complete) {
    for (auto &e : p.externs)
      if (!names.count(e))
        report(0, 0, "unresolved extern '" + e + "'");
    int boots = 0;
    for (auto &f : p.functions)
      boots += f.name == "__boot";
    if (boots != 1)
      report(0, 0, boots ? "multiple '__boot' functions" : "missing '__boot'");
  }

  for (auto &g : p.globals)
    if (g.init && g.init->size() > g.size)
      report(0, 0, "initializer larger than global '" + g.name + "'");

  for (auto &f : p.functions) {
    if (f.nparams > f.nregs)
      report(f.line, 1, "function '" + f.name + "' has fewer registers than parameters");
    if (f.blocks.empty())
      report(f.line, 1, "function '" + f.name + "' has no body");
    std::set<std::string> labels;
    for (auto &b : f.blocks)
      labels.insert(b.label);

    for (auto &b : f.blocks) {
      if (b.code.empty() || !is_terminator(b.code.back().op)) {
        int line = b.code.empty() ? f.line : b.code.back().line;
        report(line, 1, "block '" + b.label + "' in '" + f.name +
                            "' does not end in a terminator");
      }
      for (std::size_t i = 0; i < b.code.size(); ++i) {
        auto &ins = b.code[i];
        auto &oi = detail::info(ins.op);
        auto at = [&](std::string msg) { report(ins.line, ins.col, std::move(msg)); };

        if (is_terminator(ins.op) && i + 1 != b.code.size())
          at("terminator '" + std::string(oi.name) + "' in the middle of block '" +
             b.label + "'");
        int n = int(ins.args.size());
        if (n < oi.min_args || (oi.max_args >= 0 && n > oi.max_args))
          at("arity mismatch for '" + std::string(oi.name) + "'");
        if (oi.needs_dst && ins.dst < 0)
          at("'" + std::string(oi.name) + "' needs a destination register");
        if (ins.dst >= 0 && std::uint32_t(ins.dst) >= f.nregs)
          at("destination register %" + std::to_string(ins.dst) + " out of range");
        if (oi.takes_width) {
          bool ok = ins.width == 1 || ins.width == 2 || ins.width == 4 || ins.width == 8;
          if (!ok)
            at("width must be 1, 2, 4 or 8");
        }

        for (int k = 0; k < n; ++k) {
          auto &a = ins.args[k];
          bool label_slot = (ins.op == Op::Jump && k == 0) ||
                            (ins.op == Op::Br && (k == 1 || k == 2));
          if (label_slot != (a.kind == Kind::Label))
            at(label_slot ? "expected a label operand" : "unexpected label operand");
          switch (a.kind) {
          case Kind::Reg:
            if (a.value < 0 || std::uint64_t(a.value) >= f.nregs)
              at("register %" + std::to_string(a.value) + " out of range");
            break;
          case Kind::Label:
            if (!labels.count(a.name))
              at("branch to unknown label '" + a.name + "'");
            break;
          case Kind::Func:
          case Kind::Global:
          case Kind::Const: {
            bool known = names.count(a.name) > 0;
            bool ext = std::find(p.externs.begin(), p.externs.end(), a.name) != p.externs.end();
            if (!known && (!ext || opts.require_complete))
              at("unresolved reference '" + a.name + "'");
            break;
          }
          default:
            break;
          }
        }

        if (ins.op == Op::Call && !ins.args.empty() && ins.args[0].kind == Kind::Func)
          if (auto *callee = p.find_function(ins.args[0].name);
              callee && callee->nparams != ins.args.size() - 1)
            at("call to '" + callee->name + "' passes " +
               std::to_string(ins.args.size() - 1) + " argument(s), expected " +
               std::to_string(callee->nparams));
        if (ins.op == Op::Call && !ins.args.empty() && ins.args[0].kind != Kind::Func &&
            ins.args[0].kind != Kind::Reg)
          at("callee must be a function or a register");
      }
    }
  }
  return diags;
}

} // namespace gvm::gir
