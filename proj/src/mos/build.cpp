#include "gvm/mos.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gvm::mos {

namespace fs = std::filesystem;

std::vector<SourceFile> read_prelude_dir(const std::string &dir) {
  std::vector<SourceFile> out;
  std::error_code ec;
  for (auto &e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file() || e.path().extension() != ".gir")
      continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out.push_back({e.path().filename().string(), ss.str()});
  }
  if (ec)
    throw std::runtime_error("cannot read prelude directory '" + dir + "': " + ec.message());
  if (out.empty())
    throw std::runtime_error("no .gir files in prelude directory '" + dir + "'");
  std::sort(out.begin(), out.end(),
            [](const SourceFile &a, const SourceFile &b) { return a.name < b.name; });
  return out;
}

BuildResult build(const std::vector<SourceFile> &user, const BuildOptions &opts) {
  BuildResult r;
  const auto &prelude = opts.prelude.empty() ? embedded_prelude() : opts.prelude;

  std::vector<gir::Program> units;
  std::set<std::string> os_functions;
  auto parse = [&](const SourceFile &f, bool os) {
    auto p = gir::parse_program(f.text);
    for (auto &d : p.diagnostics)
      r.errors.push_back(f.name + ":" + d.str());
    if (!p.ok())
      return;
    if (os)
      for (auto &fn : p.value->functions)
        os_functions.insert(fn.name);
    units.push_back(std::move(*p.value));
  };
  for (auto &f : prelude)
    parse(f, true);
  for (auto &f : user)
    parse(f, false);
  if (!r.errors.empty())
    return r;

  auto linked = gir::link(units);
  for (auto &d : linked.diagnostics)
    r.errors.push_back("link:" + d.str());
  if (!linked.ok())
    return r;

  if (opts.malloc_can_fail) {
    if (auto g = linked.value->global_index("__malloc_can_fail")) {
      auto &decl = linked.value->globals[*g];
      decl.init = std::vector<std::uint8_t>(decl.size, 0);
      (*decl.init)[0] = 1;
    }
  }

  Build b;
  b.linked = std::move(*linked.value);
  auto policy = opts.instrumentation;
  policy.exempt.insert(os_functions.begin(), os_functions.end());
  b.program = gir::instrument(b.linked, policy);
  b.os_functions = std::move(os_functions);
  r.build = std::move(b);
  return r;
}

std::vector<std::string> scheduler_global_uses(const gir::Program &p) {
  std::vector<std::string> out;
  for (auto &name : gir::reachable_functions(p, "scheduler")) {
    auto *f = p.find_function(name);
    if (!f)
      continue;
    bool uses = false;
    for (auto &b : f->blocks)
      for (auto &ins : b.code)
        for (auto &a : ins.args)
          uses |= a.kind == gir::Operand::Kind::Global;
    if (uses)
      out.push_back(name);
  }
  return out;
}

} // namespace gvm::mos
