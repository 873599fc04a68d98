#pragma once

#include "gvm/explorer.hpp"
#include "gvm/mos.hpp"
#include "gvm/vm.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#ifndef GVM_CORPUS_DIR
#error "GVM_CORPUS_DIR must point at tests/corpus"
#endif

namespace gvmtest {

inline std::string corpus_path(const std::string &rel) {
  return std::string(GVM_CORPUS_DIR) + "/" + rel;
}

inline std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string corpus(const std::string &rel) { return read_text(corpus_path(rel)); }

// User source linked with the OS prelude and instrumented.
inline gvm::mos::Build build_user(const std::string &src, gvm::mos::BuildOptions opts = {}) {
  auto r = gvm::mos::build({{"user.gir", src}}, opts);
  if (!r.ok()) {
    std::string msg;
    for (auto &e : r.errors)
      msg += e + "\n";
    throw std::runtime_error("build failed:\n" + msg);
  }
  return std::move(*r.build);
}

inline gvm::Machine machine(const std::string &src, gvm::mos::BuildOptions opts = {}) {
  return gvm::Machine(build_user(src, opts).program);
}

inline gvm::Machine corpus_machine(const std::string &rel, gvm::mos::BuildOptions opts = {}) {
  return machine(corpus(rel), opts);
}

// A self-contained program (its own __boot and scheduler), no prelude.
inline gvm::gir::Program bare_program(const std::string &src, bool instrumented = false) {
  auto p = gvm::gir::parse_program(src);
  if (!p.ok()) {
    std::string msg;
    for (auto &d : p.diagnostics)
      msg += d.str() + "\n";
    throw std::runtime_error("parse failed:\n" + msg);
  }
  auto l = gvm::gir::link({*p.value});
  if (!l.ok()) {
    std::string msg;
    for (auto &d : l.diagnostics)
      msg += d.str() + "\n";
    throw std::runtime_error("link failed:\n" + msg);
  }
  return instrumented ? gvm::gir::instrument(*l.value) : *l.value;
}

// Reads `width` bytes at `offset` of global `name` in a snapshot.
inline gvm::Loaded read_global(const gvm::Machine &m, const gvm::Snapshot &s,
                               const std::string &name, std::uint32_t offset = 0,
                               unsigned width = 8) {
  auto idx = m.program().global_index(name);
  if (!idx)
    throw std::runtime_error("no global " + name);
  auto h = gvm::Heap::restore(s);
  auto r = h.read({gvm::PtrTag::Global, *idx, offset}, width);
  if (!r)
    throw std::runtime_error("global read faulted");
  return r.value;
}

// Runs with every choice 0 until a terminal state or an error edge.
struct SmokeRun {
  std::vector<gvm::TransitionResult> steps; // boot first
  bool terminal() const {
    return !steps.empty() && steps.back().status == gvm::TransitionStatus::Terminal;
  }
};

inline SmokeRun smoke_run(const gvm::Machine &m, const gvm::VmOptions &opts = {},
                          std::size_t limit = 10'000) {
  SmokeRun r;
  gvm::FirstChoice oracle;
  r.steps.push_back(m.boot(oracle, opts));
  while (r.steps.size() < limit) {
    auto &last = r.steps.back();
    if (last.status != gvm::TransitionStatus::Ok || last.error())
      break;
    gvm::Snapshot s = last.successor;
    r.steps.push_back(m.run(s, oracle, opts));
  }
  return r;
}

} // namespace gvmtest
