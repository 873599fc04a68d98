#pragma once

// The miniature OS shipped as GIR source, and the pipeline that turns a
// user program into a bootable image: parse, link with the prelude,
// instrument.

#include "gvm/gir.hpp"

#include <set>
#include <string>
#include <vector>

namespace gvm::mos {

struct SourceFile {
  std::string name;
  std::string text;
};

// Prelude sources compiled into the binary.
const std::vector<SourceFile> &embedded_prelude();

// All *.gir files of `dir`, sorted by name. Throws std::runtime_error when
// the directory cannot be read.
std::vector<SourceFile> read_prelude_dir(const std::string &dir);

struct BuildOptions {
  bool malloc_can_fail = false;
  gir::InstrumentationPolicy instrumentation;
  // Empty: use embedded_prelude().
  std::vector<SourceFile> prelude;
};

struct Build {
  gir::Program linked;       // before instrumentation
  gir::Program program;      // linked and instrumented
  std::set<std::string> os_functions;
};

// Diagnostics are prefixed with the offending file name.
struct BuildResult {
  std::optional<Build> build;
  std::vector<std::string> errors;
  bool ok() const { return build.has_value(); }
};

BuildResult build(const std::vector<SourceFile> &user, const BuildOptions &opts = {});

// Functions reachable from `scheduler` that reference a global.
std::vector<std::string> scheduler_global_uses(const gir::Program &p);

} // namespace gvm::mos
