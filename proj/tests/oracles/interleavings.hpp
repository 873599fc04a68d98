#pragma once

// Exhaustive interleaving of straight-line threads over shared integer
// variables, independent of the VM. Each step reads and writes the shared
// store and the thread's private registers.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Locals {
  std::map<std::string, std::int64_t> reg;
};
using Shared = std::map<std::string, std::int64_t>;
using Step = std::function<void(Shared &, Locals &)>;
using Thread = std::vector<Step>;

// Final shared stores of every interleaving. `count` receives the number
// of interleavings visited.
inline std::set<Shared> all_outcomes(const std::vector<Thread> &threads, Shared init,
                                     std::uint64_t *count = nullptr) {
  std::set<Shared> out;
  std::vector<std::size_t> pc(threads.size(), 0);
  std::vector<Locals> locals(threads.size());
  std::uint64_t n = 0;
  std::function<void(Shared)> go = [&](Shared s) {
    bool any = false;
    for (std::size_t t = 0; t < threads.size(); ++t) {
      if (pc[t] == threads[t].size())
        continue;
      any = true;
      Shared next = s;
      Locals saved = locals[t];
      threads[t][pc[t]](next, locals[t]);
      ++pc[t];
      go(next);
      --pc[t];
      locals[t] = saved;
    }
    if (!any) {
      ++n;
      out.insert(s);
    }
  };
  go(std::move(init));
  if (count)
    *count = n;
  return out;
}

// The three-step `c = c + 1` as a load, an add and a store.
inline Thread increment(const std::string &var) {
  return {
      [var](Shared &s, Locals &l) { l.reg["r"] = s[var]; },
      [](Shared &, Locals &l) { l.reg["r"] += 1; },
      [var](Shared &s, Locals &l) { s[var] = l.reg["r"]; },
  };
}

// The same increment as one indivisible step.
inline Thread atomic_increment(const std::string &var) {
  return {[var](Shared &s, Locals &) { s[var] += 1; }};
}

} // namespace oracle
