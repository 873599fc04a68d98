#include "gvm/gir.hpp"

#include <algorithm>
#include <map>

namespace gvm::gir {

Parsed<Program> link(const std::vector<Program> &units) {
  Parsed<Program> out;
  Program merged;
  std::map<std::string, std::size_t, std::less<>> owner; // symbol -> unit index

  auto define = [&](const std::string &name, std::size_t unit) {
    auto [it, fresh] = owner.emplace(name, unit);
    if (!fresh)
      out.diagnostics.push_back(
          {0, 0, "duplicate definition of '" + name + "' in units " +
                     std::to_string(it->second) + " and " + std::to_string(unit)});
    return fresh;
  };

  for (std::size_t u = 0; u < units.size(); ++u) {
    auto &unit = units[u];
    for (auto &f : unit.functions)
      if (define(f.name, u))
        merged.functions.push_back(f);
    for (auto &g : unit.globals)
      if (define(g.name, u))
        merged.globals.push_back(g);
    for (auto &c : unit.constants)
      if (define(c.name, u))
        merged.constants.push_back(c);
  }

  for (auto &unit : units)
    for (auto &e : unit.externs)
      if (!owner.count(e))
        out.diagnostics.push_back({0, 0, "unresolved extern '" + e + "'"});

  if (!owner.count("__boot"))
    out.diagnostics.push_back({0, 0, "missing '__boot'"});

  if (!out.diagnostics.empty())
    return out;

  for (auto &d : resolve(merged))
    out.diagnostics.push_back(d);
  for (auto &d : validate(merged, {.require_complete = true}))
    out.diagnostics.push_back(d);
  out.value = std::move(merged);
  return out;
}

} // namespace gvm::gir
